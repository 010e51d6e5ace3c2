use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoding::{Method, Target};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Squared difference of output and target spike trains.
    LatencyMse,
    /// Squared difference of per-window firing rate and target rate.
    RateMse,
    /// Elementwise Huber loss on spike trains.
    Huber,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    pub huber_delta: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            kind: LossKind::LatencyMse,
            huber_delta: 1.0,
        }
    }
}

impl LossSpec {
    /// The loss paired with an encoding scheme.
    pub fn for_method(m: Method) -> Self {
        let kind = match m {
            Method::Rate => LossKind::RateMse,
            Method::Delta => LossKind::Huber,
            _ => LossKind::LatencyMse,
        };
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.huber_delta > 0.0) || !self.huber_delta.is_finite() {
            return Err(Error::Config("huber delta must be positive".into()));
        }
        Ok(())
    }
}

/// Loss value and its gradient with respect to `out`, a `[C × S]` raster
/// of (possibly relaxed) spikes. Sums over every channel and step.
pub fn loss(out: &Array2<f64>, target: &Target, spec: &LossSpec) -> Result<(f64, Array2<f64>)> {
    spec.validate()?;
    if out.dim() != (target.channels(), target.steps()) {
        return Err(Error::Shape(format!(
            "output {:?} does not fit a {}-channel, {}-step target",
            out.dim(),
            target.channels(),
            target.steps()
        )));
    }
    match (spec.kind, target) {
        (LossKind::RateMse, Target::Rates { rates, exposure }) => {
            let e = *exposure;
            let mut grad = Array2::zeros(out.dim());
            let mut value = 0.0;
            for ((c, j), &y) in rates.indexed_iter() {
                let r = (0..e).map(|k| out[[c, j * e + k]]).sum::<f64>() / e as f64;
                let d = r - y;
                value += d * d;
                for k in 0..e {
                    grad[[c, j * e + k]] = 2.0 * d / e as f64;
                }
            }
            Ok((value, grad))
        }
        (LossKind::LatencyMse, Target::Spikes(t)) => {
            let diff = out - &t.bits.mapv(f64::from);
            Ok((diff.mapv(|d| d * d).sum(), diff.mapv(|d| 2.0 * d)))
        }
        (LossKind::Huber, Target::Spikes(t)) => {
            let delta = spec.huber_delta;
            let diff = out - &t.bits.mapv(f64::from);
            let value = diff
                .iter()
                .map(|&r| {
                    if r.abs() <= delta {
                        0.5 * r * r
                    } else {
                        delta * (r.abs() - 0.5 * delta)
                    }
                })
                .sum();
            Ok((value, diff.mapv(|r| r.clamp(-delta, delta))))
        }
        _ => Err(Error::Config(format!(
            "{:?} loss does not apply to this target",
            spec.kind
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::SpikeTrain;
    use ndarray::array;

    fn spikes(bits: Array2<u8>, e: usize) -> Target {
        let c = bits.nrows();
        Target::Spikes(SpikeTrain::from_bits(bits, e, c, false).unwrap())
    }

    fn spec(kind: LossKind) -> LossSpec {
        LossSpec {
            kind,
            huber_delta: 1.0,
        }
    }

    #[test]
    fn latency_example() {
        let t = spikes(array![[1u8, 0, 0, 0]], 4);
        let (v, g) = loss(
            &array![[0.0, 1.0, 0.0, 0.0]],
            &t,
            &spec(LossKind::LatencyMse),
        )
        .unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g, array![[-2.0, 2.0, 0.0, 0.0]]);
    }

    #[test]
    fn huber_branches() {
        let t = spikes(array![[0u8, 0]], 1);
        let (v, _) = loss(&array![[0.5, 0.0]], &t, &spec(LossKind::Huber)).unwrap();
        assert_eq!(v, 0.125);
        let (v, g) = loss(&array![[2.0, 0.0]], &t, &spec(LossKind::Huber)).unwrap();
        assert_eq!(v, 1.5);
        assert_eq!(g, array![[1.0, 0.0]]);
    }

    #[test]
    fn rate_uses_window_means() {
        let t = Target::Rates {
            rates: array![[0.8, 0.2]],
            exposure: 2,
        };
        let (v, g) = loss(&array![[1.0, 1.0, 0.0, 1.0]], &t, &spec(LossKind::RateMse)).unwrap();
        assert!((v - (0.04 + 0.09)).abs() < 1e-12);
        assert!((g[[0, 0]] - 0.2).abs() < 1e-12);
        assert!((g[[0, 3]] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn identical_is_zero() {
        let t = spikes(array![[1u8, 0, 1, 1]], 2);
        let out = array![[1.0, 0.0, 1.0, 1.0]];
        for k in [LossKind::LatencyMse, LossKind::Huber] {
            assert_eq!(loss(&out, &t, &spec(k)).unwrap().0, 0.0);
        }
        let r = Target::Rates {
            rates: array![[0.5, 1.0]],
            exposure: 2,
        };
        assert_eq!(loss(&out, &r, &spec(LossKind::RateMse)).unwrap().0, 0.0);
    }

    #[test]
    fn mismatches() {
        let t = spikes(array![[1u8, 0]], 1);
        assert!(matches!(
            loss(&array![[1.0, 0.0, 0.0]], &t, &spec(LossKind::LatencyMse)),
            Err(Error::Shape(_))
        ));
        assert!(loss(&array![[1.0, 0.0]], &t, &spec(LossKind::RateMse)).is_err());
    }

    #[test]
    fn gradients_match_differences() {
        let t = spikes(array![[1u8, 0, 0, 1], [0, 1, 1, 0]], 2);
        let out = array![[0.3, 2.1, -0.4, 0.9], [0.0, 1.7, 0.2, 0.6]];
        for k in [LossKind::LatencyMse, LossKind::Huber] {
            let (_, g) = loss(&out, &t, &spec(k)).unwrap();
            for idx in [(0, 1), (1, 2), (0, 2)] {
                let h = 1e-6;
                let mut a = out.clone();
                a[idx] += h;
                let mut b = out.clone();
                b[idx] -= h;
                let fd = (loss(&a, &t, &spec(k)).unwrap().0 - loss(&b, &t, &spec(k)).unwrap().0)
                    / (2.0 * h);
                assert!((fd - g[idx]).abs() < 1e-6);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn nonnegative_and_zero_only_on_match(
            t_bits in proptest::collection::vec(0u8..2, 12),
            o_bits in proptest::collection::vec(0u8..2, 12),
        ) {
            let t = spikes(Array2::from_shape_vec((2, 6), t_bits.clone()).unwrap(), 2);
            let out = Array2::from_shape_vec((2, 6), o_bits.clone()).unwrap().mapv(f64::from);
            for k in [LossKind::LatencyMse, LossKind::Huber] {
                let v = loss(&out, &t, &spec(k)).unwrap().0;
                proptest::prop_assert!(v >= 0.0);
                proptest::prop_assert_eq!(v == 0.0, t_bits == o_bits);
            }
        }
    }
}
