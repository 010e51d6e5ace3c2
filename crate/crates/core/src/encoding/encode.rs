use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_unit_range, SpikeTrain};
use crate::error::Result;

/// How step-forward events are laid out over an exposure window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepForwardMode {
    /// Event on the first step, silence after.
    First,
    /// Event repeated on every step of the window.
    Direct,
    /// Event on step 0, non-event as a spike on the background step.
    Latency,
}

/// Local spike step for intensity `x`: `floor((1 - x)(E - 1))`.
pub fn latency_step(x: f32, exposure: usize) -> usize {
    let step = ((1.0 - x) * (exposure - 1) as f32).floor();
    (step.max(0.0) as usize).min(exposure - 1)
}

/// Step that means "no RFI" in latency-coded windows, if it fits.
///
/// For `E >= 2` this is the last step `E - 1`; a single-step window has no
/// room for it and stays silent instead.
pub(crate) fn background_step(exposure: usize) -> Option<usize> {
    (exposure >= 2).then(|| exposure - 1)
}

/// One spike per pixel, earlier for brighter pixels.
pub fn encode_latency(values: ArrayView2<f32>, exposure: usize) -> Result<SpikeTrain> {
    check_unit_range(&values)?;
    let (f, t) = values.dim();
    let mut out = SpikeTrain::zeros(f, t, exposure, false);
    for ((i, j), &x) in values.indexed_iter() {
        out.bits[[i, j * exposure + latency_step(x, exposure)]] = 1;
    }
    Ok(out)
}

/// Bernoulli spikes with probability equal to the pixel value.
///
/// Each pixel draws from its own ChaCha stream keyed by its absolute
/// position `(origin + index)`, so encoding a whole spectrogram or its
/// patches in any order gives the same spikes.
pub fn encode_rate(
    values: ArrayView2<f32>,
    origin: (usize, usize),
    exposure: usize,
    seed: u64,
) -> Result<SpikeTrain> {
    check_unit_range(&values)?;
    let (f, t) = values.dim();
    let mut out = SpikeTrain::zeros(f, t, exposure, false);
    for ((i, j), &x) in values.indexed_iter() {
        let key = (((origin.0 + i) as u64) << 32) | (origin.1 + j) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(key);
        for e in 0..exposure {
            if rng.random::<f32>() < x {
                out.bits[[i, j * exposure + e]] = 1;
            }
        }
    }
    Ok(out)
}

/// Signed change events `(positive, negative)` per pixel.
fn delta_events(values: &ArrayView2<f32>, threshold: f32) -> Vec<(usize, usize, bool)> {
    let (f, t) = values.dim();
    let mut events = Vec::new();
    for i in 0..f {
        for j in 1..t {
            let d = values[[i, j]] - values[[i, j - 1]];
            if d > threshold {
                events.push((i, j, true));
            } else if -d > threshold {
                events.push((i, j, false));
            }
        }
    }
    events
}

/// Spike when a channel changes by more than `threshold` between steps.
pub fn encode_delta(values: ArrayView2<f32>, threshold: f32) -> Result<SpikeTrain> {
    encode_delta_exposure(values, 1, threshold)
}

/// Delta events on the first step of each exposure window.
pub fn encode_delta_exposure(
    values: ArrayView2<f32>,
    exposure: usize,
    threshold: f32,
) -> Result<SpikeTrain> {
    check_unit_range(&values)?;
    let (f, t) = values.dim();
    let mut out = SpikeTrain::zeros(f, t, exposure, true);
    for (i, j, up) in delta_events(&values, threshold) {
        let c = if up { i } else { f + i };
        out.bits[[c, j * exposure]] = 1;
    }
    Ok(out)
}

/// Step-forward events: a per-channel baseline starts at the first sample
/// and moves by `threshold` every time the signal escapes the band
/// `baseline ± threshold`, emitting one event per step at most.
fn step_forward_events(values: &ArrayView2<f32>, threshold: f32) -> Vec<(usize, usize, bool)> {
    let (f, t) = values.dim();
    let mut events = Vec::new();
    for i in 0..f {
        let mut base = values[[i, 0]];
        for j in 1..t {
            let x = values[[i, j]];
            if x > base + threshold {
                base += threshold;
                events.push((i, j, true));
            } else if x < base - threshold {
                base -= threshold;
                events.push((i, j, false));
            }
        }
    }
    events
}

pub fn encode_step_forward(
    values: ArrayView2<f32>,
    exposure: usize,
    mode: StepForwardMode,
    threshold: f32,
) -> Result<SpikeTrain> {
    check_unit_range(&values)?;
    let (f, t) = values.dim();
    let mut out = SpikeTrain::zeros(f, t, exposure, true);
    let mut hit = ndarray::Array2::from_elem((2 * f, t), false);
    for (i, j, up) in step_forward_events(&values, threshold) {
        hit[[if up { i } else { f + i }, j]] = true;
    }
    for ((c, j), &h) in hit.indexed_iter() {
        let w = j * exposure;
        match (mode, h) {
            (StepForwardMode::First, true) | (StepForwardMode::Latency, true) => {
                out.bits[[c, w]] = 1
            }
            (StepForwardMode::Direct, true) => {
                for e in 0..exposure {
                    out.bits[[c, w + e]] = 1;
                }
            }
            (StepForwardMode::Latency, false) => {
                if let Some(b) = background_step(exposure) {
                    out.bits[[c, w + b]] = 1;
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn row(v: &[f32]) -> Array2<f32> {
        Array2::from_shape_vec((1, v.len()), v.to_vec()).unwrap()
    }

    fn window(st: &SpikeTrain, c: usize, j: usize) -> Vec<u8> {
        let e = st.exposure;
        (0..e).map(|k| st.bits[[c, j * e + k]]).collect()
    }

    #[test]
    fn latency_extremes() {
        let st = encode_latency(row(&[1.0, 0.0]).view(), 4).unwrap();
        assert_eq!(window(&st, 0, 0), vec![1, 0, 0, 0]);
        assert_eq!(window(&st, 0, 1), vec![0, 0, 0, 1]);
        assert_eq!(st.channels(), 1);
    }

    #[test]
    fn latency_single_step_exposure() {
        let st = encode_latency(row(&[0.0, 0.3, 1.0]).view(), 1).unwrap();
        assert_eq!(st.bits, array![[1u8, 1, 1]]);
    }

    #[test]
    fn latency_rejects_out_of_range() {
        assert!(encode_latency(row(&[1.2]).view(), 4).is_err());
        assert!(encode_latency(row(&[-0.1]).view(), 4).is_err());
    }

    #[test]
    fn latency_one_spike_per_pixel() {
        let v = Array2::from_shape_fn((5, 7), |(i, j)| ((i * 7 + j) as f32 / 34.0).min(1.0));
        let st = encode_latency(v.view(), 8).unwrap();
        assert_eq!(st.spike_count(), 35);
    }

    #[test]
    fn rate_extremes() {
        let st = encode_rate(row(&[0.0, 1.0]).view(), (0, 0), 16, 5).unwrap();
        assert!(window(&st, 0, 0).iter().all(|&b| b == 0));
        assert!(window(&st, 0, 1).iter().all(|&b| b == 1));
    }

    #[test]
    fn rate_concentration() {
        let v = Array2::from_elem((25, 40), 0.5f32);
        let st = encode_rate(v.view(), (0, 0), 64, 1234).unwrap();
        let rate = st.spike_count() as f64 / (1000.0 * 64.0);
        assert!((rate - 0.5).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn rate_patches_agree_with_whole() {
        let v = Array2::from_shape_fn((4, 6), |(i, j)| ((i + j) % 5) as f32 / 4.0);
        let whole = encode_rate(v.view(), (0, 0), 8, 77).unwrap();
        let part = encode_rate(v.slice(ndarray::s![2..4, 3..6]), (2, 3), 8, 77).unwrap();
        assert_eq!(part.bits, whole.bits.slice(ndarray::s![2..4, 24..48]));
    }

    #[test]
    fn delta_constant_is_silent() {
        let st = encode_delta(row(&[0.4; 6]).view(), 0.1).unwrap();
        assert_eq!(st.spike_count(), 0);
        assert_eq!(st.channels(), 2);
    }

    #[test]
    fn delta_polarities() {
        let st = encode_delta(row(&[0.0, 0.5, 0.5, 0.1]).view(), 0.1).unwrap();
        assert_eq!(st.bits, array![[0u8, 1, 0, 0], [0, 0, 0, 1]]);
    }

    #[test]
    fn delta_threshold_is_strict() {
        let st = encode_delta(row(&[0.0, 0.1]).view(), 0.1).unwrap();
        assert_eq!(st.spike_count(), 0);
        let st = encode_delta(row(&[0.25, 0.5]).view(), 0.25).unwrap();
        assert_eq!(st.spike_count(), 0);
    }

    #[test]
    fn delta_exposure_first_step() {
        let st = encode_delta_exposure(row(&[0.0, 0.5]).view(), 4, 0.1).unwrap();
        assert_eq!(st.bits.row(0).to_vec(), vec![0, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(st.bits.row(1).iter().sum::<u8>(), 0);
        let v = row(&[0.9, 0.2, 0.2, 0.7, 0.1]);
        assert_eq!(
            encode_delta_exposure(v.view(), 1, 0.1).unwrap(),
            encode_delta(v.view(), 0.1).unwrap()
        );
        assert_eq!(
            encode_delta_exposure(row(&[0.3; 5]).view(), 6, 0.1)
                .unwrap()
                .spike_count(),
            0
        );
    }

    #[test]
    fn step_forward_trace() {
        let v = row(&[0.0, 0.25, 0.25, 0.05]);
        let st = encode_step_forward(v.view(), 1, StepForwardMode::First, 0.1).unwrap();
        assert_eq!(st.bits, array![[0u8, 1, 1, 0], [0, 0, 0, 1]]);
    }

    #[test]
    fn step_forward_constant_first_is_silent() {
        for e in [1, 3, 8] {
            let st =
                encode_step_forward(row(&[0.6; 5]).view(), e, StepForwardMode::First, 0.1).unwrap();
            assert_eq!(st.spike_count(), 0);
        }
    }

    #[test]
    fn step_forward_direct_stretch() {
        let st =
            encode_step_forward(row(&[0.0, 0.5]).view(), 3, StepForwardMode::Direct, 0.1).unwrap();
        assert_eq!(st.bits.row(0).to_vec(), vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn step_forward_latency_layout() {
        let st =
            encode_step_forward(row(&[0.0, 0.5]).view(), 4, StepForwardMode::Latency, 0.1).unwrap();
        // positive channel: no event at t=0, event at t=1
        assert_eq!(st.bits.row(0).to_vec(), vec![0, 0, 0, 1, 1, 0, 0, 0]);
        // negative channel: no events
        assert_eq!(st.bits.row(1).to_vec(), vec![0, 0, 0, 1, 0, 0, 0, 1]);
    }
}
