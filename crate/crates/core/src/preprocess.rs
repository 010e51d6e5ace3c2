//! Sigma-clipped min-max scaling and divisive normalisation.
//!
//! Spectrograms are scaled into `[0, 1]` first; divisive normalisation then
//! subtracts, from every pixel, the summed intensity of a `k`-channel
//! neighbourhood in the immediately preceding time column:
//!
//! ```text
//! V_dn(f, t) = V(f, t) - sum_{i = -k/2 .. k/2} V(f + i, t - 1)
//! ```
//!
//! Channels outside the band are left out of the sum and the first column
//! is passed through. Only one earlier column is read, so the transform can
//! run on a live stream.

use serde::{Deserialize, Serialize};

use crate::data::Spectrogram;
use crate::error::{Error, Result};

/// Clipping window, in standard deviations below and above the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub lower_sigmas: f64,
    pub upper_sigmas: f64,
}

impl ScalingSpec {
    /// One sigma below, four above.
    pub const HERA: ScalingSpec = ScalingSpec {
        lower_sigmas: 1.0,
        upper_sigmas: 4.0,
    };
    /// Three sigma below, 95 above.
    pub const LOFAR: ScalingSpec = ScalingSpec {
        lower_sigmas: 3.0,
        upper_sigmas: 95.0,
    };

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.lower_sigmas, self.upper_sigmas);
        if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!(
                "scaling sigmas ({a}, {b}) must be non-negative with a positive sum"
            )));
        }
        Ok(())
    }
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self::HERA
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivNormSpec {
    /// Odd neighbourhood width in channels.
    pub kernel_size: usize,
    /// Clamp the result back into `[0, 1]`.
    pub clamp_output: bool,
}

impl Default for DivNormSpec {
    fn default() -> Self {
        Self {
            kernel_size: 3,
            clamp_output: true,
        }
    }
}

/// Min-max scales between `mean - a*sigma` and `mean + b*sigma`, clamping to
/// `[0, 1]`. A constant spectrogram maps to 0.5 everywhere.
pub fn scale(s: &Spectrogram, spec: &ScalingSpec) -> Result<Spectrogram> {
    spec.validate()?;
    if s.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(
            "spectrogram holds non-finite values".into(),
        ));
    }
    let n = s.values.len() as f64;
    let mean = s.values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = s
        .values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let sigma = var.sqrt();
    let mut out = s.clone();
    if sigma == 0.0 {
        out.values.fill(0.5);
    } else {
        let lo = mean - spec.lower_sigmas * sigma;
        let width = (spec.lower_sigmas + spec.upper_sigmas) * sigma;
        out.values
            .mapv_inplace(|v| ((v as f64 - lo) / width).clamp(0.0, 1.0) as f32);
    }
    out.meta.insert(
        "scaling".into(),
        format!("{},{}", spec.lower_sigmas, spec.upper_sigmas),
    );
    Ok(out)
}

/// Applies divisive normalisation to an already scaled spectrogram.
pub fn divisive_normalise(s: &Spectrogram, spec: &DivNormSpec) -> Result<Spectrogram> {
    let (f, t) = s.dim();
    let k = spec.kernel_size;
    if k.is_multiple_of(2) || k == 0 {
        return Err(Error::Config(format!("kernel size {k} must be odd")));
    }
    if k > f {
        return Err(Error::Config(format!(
            "kernel size {k} exceeds {f} channels"
        )));
    }
    if let Some(v) = s.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Precondition(format!(
            "divisive normalisation needs scaled input, found {v}"
        )));
    }
    let half = k / 2;
    let mut out = s.clone();
    for j in 1..t {
        for i in 0..f {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(f - 1);
            let pool: f64 = (lo..=hi).map(|c| s.values[[c, j - 1]] as f64).sum();
            let mut v = s.values[[i, j]] as f64 - pool;
            if spec.clamp_output {
                v = v.clamp(0.0, 1.0);
            }
            out.values[[i, j]] = v as f32;
        }
    }
    out.meta.insert("divnorm".into(), k.to_string());
    Ok(out)
}
