//! Synthetic HERA-like spectrograms with exact ground-truth masks.
//!
//! Each spectrogram is a smooth frequency gradient plus Gaussian noise, with
//! four RFI morphologies injected additively:
//!
//! * persistent narrowband lines (a few channels, every time step),
//! * transient broadband stripes (every channel, one or two time steps),
//! * narrowband blocks localised in both frequency and time,
//! * isolated single-pixel blips.
//!
//! The mask is exactly the set of pixels that received RFI. Events are drawn
//! until the per-spectrogram pixel budget `round(contamination * F * T)` is
//! met, and any remainder is filled with blips, so every spectrogram hits the
//! target density up to rounding.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Spectrogram, PATCH_SIZE};
use crate::error::{Error, Result};

/// Knobs of the synthetic generator. The defaults are used by
/// [`generate_synthetic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Range of the mean background level.
    pub level: (f64, f64),
    /// Maximum relative tilt of the background across the band.
    pub gradient: f64,
    /// Noise standard deviation relative to the mean background level.
    pub noise: f64,
    /// Event amplitude range as a multiple of the background maximum.
    pub amplitude: (f64, f64),
    /// Per-pixel amplitude jitter: each pixel keeps a uniform fraction in
    /// `[1 - scintillation, 1]` of its event amplitude.
    pub scintillation: f64,
    /// Relative draw weights of line, stripe, block and blip events.
    pub weights: [f64; 4],
    /// Longest narrowband block as a fraction of the time axis.
    pub max_block_fraction: f64,
    /// Fraction of `count` assigned to the test split.
    pub test_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            level: (1.0, 2.0),
            gradient: 0.6,
            noise: 0.05,
            amplitude: (1.0, 3.0),
            scintillation: 0.5,
            weights: [0.15, 0.2, 0.35, 0.3],
            max_block_fraction: 0.25,
            test_fraction: 0.25,
        }
    }
}

#[derive(Clone, Copy)]
enum Morphology {
    Line,
    Stripe,
    Block,
    Blip,
}

/// Generates `count` spectrograms of size `f × t` with the default knobs.
///
/// A quarter of the spectrograms (rounded down) go to the test split.
pub fn generate_synthetic(
    count: usize,
    f: usize,
    t: usize,
    contamination: f64,
    seed: u64,
) -> Result<Dataset> {
    generate_with(&SynthConfig::default(), count, f, t, contamination, seed)
}

pub fn generate_with(
    cfg: &SynthConfig,
    count: usize,
    f: usize,
    t: usize,
    contamination: f64,
    seed: u64,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Precondition("count must be positive".into()));
    }
    if f < PATCH_SIZE
        || t < PATCH_SIZE
        || !f.is_multiple_of(PATCH_SIZE)
        || !t.is_multiple_of(PATCH_SIZE)
    {
        return Err(Error::Dimension(format!(
            "{f}x{t} must be at least {PATCH_SIZE} and divisible by {PATCH_SIZE}"
        )));
    }
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::Precondition(format!(
            "contamination {contamination} must lie in (0, 1)"
        )));
    }
    if contamination > 0.5 {
        return Err(Error::Precondition(format!(
            "contamination {contamination} above 0.5 is not achievable"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_test = ((count as f64) * cfg.test_fraction).floor() as usize;
    let mut all = Vec::with_capacity(count);
    for index in 0..count {
        let mut s = one(cfg, &mut rng, f, t, contamination);
        s.meta.insert("source".into(), "synthetic".into());
        s.meta.insert("seed".into(), seed.to_string());
        s.meta.insert("index".into(), index.to_string());
        all.push(s);
    }
    let test = all.split_off(count - n_test);
    Ok(Dataset {
        train: all,
        test,
        seed: Some(seed),
    })
}

fn one(cfg: &SynthConfig, rng: &mut ChaCha8Rng, f: usize, t: usize, c: f64) -> Spectrogram {
    let level = rng.random_range(cfg.level.0..=cfg.level.1);
    let tilt = rng.random_range(-cfg.gradient..=cfg.gradient);
    let curve = rng.random_range(-0.5 * cfg.gradient..=0.5 * cfg.gradient);
    let noise = Normal::new(0.0, cfg.noise * level).expect("noise scale is finite");

    let mut values = Array2::<f64>::zeros((f, t));
    for ((i, _), v) in values.indexed_iter_mut() {
        let x = i as f64 / (f - 1).max(1) as f64 - 0.5;
        *v = level * (1.0 + tilt * x + curve * (4.0 * x * x - 1.0 / 3.0)) + noise.sample(rng);
    }
    let bg_max = values.iter().copied().fold(f64::MIN, f64::max);

    let budget = (c * (f * t) as f64).round() as usize;
    let mut mask = Array2::from_elem((f, t), false);
    let mut count = 0usize;
    let total_weight: f64 = cfg.weights.iter().sum();
    let max_block = ((t as f64 * cfg.max_block_fraction) as usize).max(2);

    for _ in 0..1000 {
        if count >= budget {
            break;
        }
        let mut r = rng.random_range(0.0..total_weight);
        let mut morph = Morphology::Blip;
        for (m, w) in [
            Morphology::Line,
            Morphology::Stripe,
            Morphology::Block,
            Morphology::Blip,
        ]
        .into_iter()
        .zip(cfg.weights)
        {
            if r < w {
                morph = m;
                break;
            }
            r -= w;
        }
        let (f0, f1, t0, t1) = match morph {
            Morphology::Line => {
                let w = rng.random_range(1..=2);
                let f0 = rng.random_range(0..=f - w);
                (f0, f0 + w, 0, t)
            }
            Morphology::Stripe => {
                let d = rng.random_range(1..=2);
                let t0 = rng.random_range(0..=t - d);
                (0, f, t0, t0 + d)
            }
            Morphology::Block => {
                let w = rng.random_range(1..=3);
                let d = rng.random_range(2..=max_block);
                let f0 = rng.random_range(0..=f - w);
                let t0 = rng.random_range(0..=t - d);
                (f0, f0 + w, t0, t0 + d)
            }
            Morphology::Blip => {
                let f0 = rng.random_range(0..f);
                let t0 = rng.random_range(0..t);
                (f0, f0 + 1, t0, t0 + 1)
            }
        };
        let fresh = (f0..f1)
            .flat_map(|i| (t0..t1).map(move |j| (i, j)))
            .filter(|&(i, j)| !mask[[i, j]])
            .count();
        if fresh == 0 || count + fresh > budget {
            continue;
        }
        let amp = bg_max * rng.random_range(cfg.amplitude.0..=cfg.amplitude.1);
        inject(rng, cfg, &mut values, &mut mask, (f0, f1, t0, t1), amp);
        count += fresh;
    }
    while count < budget {
        let i = rng.random_range(0..f);
        let j = rng.random_range(0..t);
        if mask[[i, j]] {
            continue;
        }
        let amp = bg_max * rng.random_range(cfg.amplitude.0..=cfg.amplitude.1);
        inject(rng, cfg, &mut values, &mut mask, (i, i + 1, j, j + 1), amp);
        count += 1;
    }

    let mut s =
        Spectrogram::new(values.mapv(|v| v as f32), mask).expect("values and mask share a shape");
    s.meta.insert(
        "contamination".into(),
        format!("{:.6}", count as f64 / (f * t) as f64),
    );
    s
}

fn inject(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    values: &mut Array2<f64>,
    mask: &mut Array2<bool>,
    (f0, f1, t0, t1): (usize, usize, usize, usize),
    amp: f64,
) {
    for i in f0..f1 {
        for j in t0..t1 {
            let jitter = 1.0 - cfg.scintillation * rng.random_range(0.0..1.0);
            values[[i, j]] += amp * jitter;
            mask[[i, j]] = true;
        }
    }
}
