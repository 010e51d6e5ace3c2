use ndarray::Array2;

use super::{EncoderSpec, Method, SpikeTrain, Target};
use crate::error::{Error, Result};

/// Flags and confidence scores for an `F × T` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub flags: Array2<bool>,
    /// Confidence in `[0, 1]`; a flagged pixel always has a positive score.
    pub scores: Array2<f64>,
}

/// Decodes an output raster into flags and scores.
///
/// * latency family: flagged when the first spike of a window lands before
///   the background step; score `(L - t_first) / L` with `L = max(E-1, 1)`,
///   zero for silent windows.
/// * rate: score is the window firing rate, flagged when strictly above
///   `rate_decode_threshold`.
/// * delta: a positive-block spike opens a flagged run that lasts until a
///   negative-block spike on the same channel.
pub fn decode(out: &SpikeTrain, spec: &EncoderSpec) -> Result<Decoded> {
    let want_doubled = spec.method == Method::Delta;
    let f = out.base_channels;
    let expected = if want_doubled { 2 * f } else { f };
    if out.polarity_doubled != want_doubled || out.channels() != expected {
        return Err(Error::Width(format!(
            "{} output expects {expected} channels, raster has {}",
            spec.method,
            out.channels()
        )));
    }
    let e = out.exposure;
    if e != spec.effective_exposure() {
        return Err(Error::Shape(format!(
            "raster exposure {e} differs from encoder exposure {}",
            spec.effective_exposure()
        )));
    }
    let t = out.windows();
    let mut flags = Array2::from_elem((f, t), false);
    let mut scores = Array2::<f64>::zeros((f, t));
    match spec.method {
        Method::Rate => {
            for i in 0..f {
                for j in 0..t {
                    let n: usize = (0..e).map(|k| out.bits[[i, j * e + k]] as usize).sum();
                    let r = n as f64 / e as f64;
                    scores[[i, j]] = r;
                    flags[[i, j]] = r > spec.rate_decode_threshold;
                }
            }
        }
        Method::Delta => {
            for i in 0..f {
                let mut on = false;
                for j in 0..t {
                    if out.bits[[f + i, j]] == 1 {
                        on = false;
                    }
                    if out.bits[[i, j]] == 1 {
                        on = true;
                    }
                    flags[[i, j]] = on;
                    scores[[i, j]] = if on { 1.0 } else { 0.0 };
                }
            }
        }
        _ => {
            let quiet = (e - 1).max(1);
            for i in 0..f {
                for j in 0..t {
                    let first = (0..e).find(|&k| out.bits[[i, j * e + k]] == 1);
                    if let Some(k) = first {
                        if k < quiet {
                            flags[[i, j]] = true;
                            scores[[i, j]] = (quiet - k) as f64 / quiet as f64;
                        }
                    }
                }
            }
        }
    }
    Ok(Decoded { flags, scores })
}

/// Thresholds per-window firing rates.
pub fn decode_rates(rates: &Array2<f64>, spec: &EncoderSpec) -> Decoded {
    Decoded {
        flags: rates.mapv(|r| r > spec.rate_decode_threshold),
        scores: rates.mapv(|r| r.clamp(0.0, 1.0)),
    }
}

pub fn decode_target(target: &Target, spec: &EncoderSpec) -> Result<Decoded> {
    match target {
        Target::Spikes(s) => decode(s, spec),
        Target::Rates { rates, .. } => Ok(decode_rates(rates, spec)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_target;
    use ndarray::{array, Array2};

    fn single_window(bits: &[u8]) -> SpikeTrain {
        let raster = Array2::from_shape_vec((1, bits.len()), bits.to_vec()).unwrap();
        SpikeTrain::from_bits(raster, bits.len(), 1, false).unwrap()
    }

    #[test]
    fn latency_early_spike() {
        let d = decode(
            &single_window(&[0, 1, 0, 0]),
            &EncoderSpec::new(Method::Latency, 4),
        )
        .unwrap();
        assert!(d.flags[[0, 0]]);
        assert!((d.scores[[0, 0]] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn latency_final_step_is_background() {
        let spec = EncoderSpec::new(Method::Latency, 4);
        let d = decode(&single_window(&[0, 0, 0, 1]), &spec).unwrap();
        assert!(!d.flags[[0, 0]]);
        assert_eq!(d.scores[[0, 0]], 0.0);
        let d = decode(&single_window(&[0, 0, 0, 0]), &spec).unwrap();
        assert!(!d.flags[[0, 0]]);
    }

    #[test]
    fn rate_threshold_is_strict() {
        let spec = EncoderSpec::new(Method::Rate, 4);
        let d = decode(&single_window(&[1, 1, 0, 1]), &spec).unwrap();
        assert_eq!(d.scores[[0, 0]], 0.75);
        assert!(!d.flags[[0, 0]]);
        let d = decode(&single_window(&[1, 1, 1, 1]), &spec).unwrap();
        assert!(d.flags[[0, 0]]);
    }

    #[test]
    fn channel_mismatch() {
        let spec = EncoderSpec::new(Method::Delta, 1);
        let st = SpikeTrain::zeros(3, 4, 1, false);
        assert!(matches!(decode(&st, &spec), Err(Error::Width(_))));
    }

    #[test]
    fn delta_runs() {
        let spec = EncoderSpec::new(Method::Delta, 1);
        let st =
            SpikeTrain::from_bits(array![[0u8, 1, 0, 0, 1], [0, 0, 0, 1, 0]], 1, 1, true).unwrap();
        let d = decode(&st, &spec).unwrap();
        assert_eq!(d.flags, array![[false, true, true, false, true]]);
    }

    #[test]
    fn round_trip_every_method() {
        let mask = Array2::from_shape_fn((6, 9), |(i, j)| (i * 5 + j * 3) % 4 == 0);
        for m in Method::ALL {
            for e in [1, 2, 4, 8] {
                let spec = EncoderSpec::new(m, e);
                let d = decode_target(&encode_target(mask.view(), &spec), &spec).unwrap();
                assert_eq!(d.flags, mask, "{m} E={e}");
                for (&fl, &s) in d.flags.iter().zip(d.scores.iter()) {
                    assert!((0.0..=1.0).contains(&s));
                    if fl {
                        assert!(s > 0.0);
                    }
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn round_trip_random_masks(
            bits in proptest::collection::vec(proptest::bool::weighted(0.3), 8 * 12),
            m in 0usize..7,
            e in proptest::sample::select(vec![1usize, 2, 4, 8]),
        ) {
            let mask = Array2::from_shape_vec((8, 12), bits).unwrap();
            let spec = EncoderSpec::new(Method::ALL[m], e);
            let d = decode_target(&encode_target(mask.view(), &spec), &spec).unwrap();
            proptest::prop_assert_eq!(d.flags, mask);
        }
    }
}
