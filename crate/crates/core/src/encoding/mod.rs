//! Spike encoders, supervision targets and output decoders.
//!
//! Every scheme turns an `F × T` grid into a spike train of
//! `C × (T·E)` steps, where `E` is the exposure (steps per original time
//! step) and `C` is `F`, or `2F` for schemes that carry polarity. Negative
//! polarity events are moved to channels `F..2F` as positive spikes.
//!
//! | method           | input width | exposure | target         | loss        |
//! |------------------|-------------|----------|----------------|-------------|
//! | `latency`        | F           | E        | latency        | latency MSE |
//! | `rate`           | F           | E        | firing rates   | rate MSE    |
//! | `delta`          | 2F          | 1        | onset/offset   | Huber       |
//! | `delta_exposure` | 2F          | E        | latency        | latency MSE |
//! | `sf_first`       | 2F          | E        | latency        | latency MSE |
//! | `sf_direct`      | 2F          | E        | latency        | latency MSE |
//! | `sf_latency`     | 2F          | E        | latency        | latency MSE |

mod decode;
mod encode;
mod target;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Patch;
use crate::error::{Error, Result};

pub use decode::{decode, decode_rates, decode_target, Decoded};
pub use encode::{
    encode_delta, encode_delta_exposure, encode_latency, encode_rate, encode_step_forward,
    latency_step, StepForwardMode,
};
pub use target::{encode_target, Target};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Latency,
    Rate,
    Delta,
    DeltaExposure,
    SfFirst,
    SfDirect,
    SfLatency,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Latency,
        Method::Rate,
        Method::Delta,
        Method::DeltaExposure,
        Method::SfFirst,
        Method::SfDirect,
        Method::SfLatency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Latency => "latency",
            Method::Rate => "rate",
            Method::Delta => "delta",
            Method::DeltaExposure => "delta_exposure",
            Method::SfFirst => "sf_first",
            Method::SfDirect => "sf_direct",
            Method::SfLatency => "sf_latency",
        }
    }

    /// Schemes whose targets and decoding follow the latency convention.
    pub fn is_latency_family(self) -> bool {
        !matches!(self, Method::Rate | Method::Delta)
    }

    /// Whether the input spike train carries two polarity blocks.
    pub fn doubles_input(self) -> bool {
        !matches!(self, Method::Latency | Method::Rate)
    }

    /// Network input width for `f` frequency channels.
    pub fn input_width(self, f: usize) -> usize {
        if self.doubles_input() {
            2 * f
        } else {
            f
        }
    }

    /// Network output width for `f` frequency channels.
    pub fn output_width(self, f: usize) -> usize {
        if self == Method::Delta {
            2 * f
        } else {
            f
        }
    }

    /// Exposure actually used; delta modulation never stretches time.
    pub fn effective_exposure(self, exposure: usize) -> usize {
        if self == Method::Delta {
            1
        } else {
            exposure
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown encoding method {s:?}")))
    }
}

/// Encoder configuration shared by input encoding, targets and decoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    pub method: Method,
    pub exposure: usize,
    pub delta_threshold: f32,
    pub rate_hi: f64,
    pub rate_lo: f64,
    pub rate_decode_threshold: f64,
    pub seed: u64,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            method: Method::Latency,
            exposure: 4,
            delta_threshold: 0.1,
            rate_hi: 0.8,
            rate_lo: 0.2,
            rate_decode_threshold: 0.75,
            seed: 0,
        }
    }
}

impl EncoderSpec {
    pub fn new(method: Method, exposure: usize) -> Self {
        Self {
            method,
            exposure,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=64).contains(&self.exposure) {
            return Err(Error::Config(format!(
                "exposure {} outside [1, 64]",
                self.exposure
            )));
        }
        if !(self.delta_threshold >= 0.0) {
            return Err(Error::Config("delta threshold must be non-negative".into()));
        }
        if self.method == Method::Rate
            && !(0.0 < self.rate_lo
                && self.rate_lo < self.rate_decode_threshold
                && self.rate_decode_threshold < self.rate_hi
                && self.rate_hi <= 1.0)
        {
            return Err(Error::Config(format!(
                "rate levels need 0 < lo ({}) < decode ({}) < hi ({}) <= 1",
                self.rate_lo, self.rate_decode_threshold, self.rate_hi
            )));
        }
        Ok(())
    }

    pub fn effective_exposure(&self) -> usize {
        self.method.effective_exposure(self.exposure)
    }

    /// Score above which a pixel is flagged.
    pub fn score_threshold(&self) -> f64 {
        match self.method {
            Method::Rate => self.rate_decode_threshold,
            Method::Delta => 0.5,
            _ => 0.0,
        }
    }
}

/// A binary `C × (T·E)` spike raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTrain {
    /// Spikes, shape `[channels, steps]`, every entry 0 or 1.
    pub bits: Array2<u8>,
    pub exposure: usize,
    /// Frequency channels the train was derived from.
    pub base_channels: usize,
    pub polarity_doubled: bool,
}

impl SpikeTrain {
    pub fn zeros(base_channels: usize, steps: usize, exposure: usize, doubled: bool) -> Self {
        let c = if doubled {
            2 * base_channels
        } else {
            base_channels
        };
        Self {
            bits: Array2::zeros((c, steps * exposure)),
            exposure,
            base_channels,
            polarity_doubled: doubled,
        }
    }

    /// Wraps a raw raster, validating its layout.
    pub fn from_bits(
        bits: Array2<u8>,
        exposure: usize,
        base_channels: usize,
        polarity_doubled: bool,
    ) -> Result<Self> {
        let expected = if polarity_doubled {
            2 * base_channels
        } else {
            base_channels
        };
        if bits.nrows() != expected {
            return Err(Error::Width(format!(
                "raster has {} channels, expected {expected}",
                bits.nrows()
            )));
        }
        if exposure == 0 || !bits.ncols().is_multiple_of(exposure) {
            return Err(Error::Shape(format!(
                "{} steps not divisible by exposure {exposure}",
                bits.ncols()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Shape("spike raster must be binary".into()));
        }
        Ok(Self {
            bits,
            exposure,
            base_channels,
            polarity_doubled,
        })
    }

    pub fn channels(&self) -> usize {
        self.bits.nrows()
    }

    /// Total spike-train steps, `T·E`.
    pub fn steps(&self) -> usize {
        self.bits.ncols()
    }

    /// Original time steps, `T`.
    pub fn windows(&self) -> usize {
        self.steps() / self.exposure
    }

    pub fn spike_count(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

pub(crate) fn check_unit_range(values: &ArrayView2<f32>) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Precondition(format!(
            "encoder input {v} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Encodes a patch with the configured scheme.
pub fn encode(p: &Patch, spec: &EncoderSpec) -> Result<SpikeTrain> {
    encode_values(p.values.view(), p.origin, spec)
}

/// Encodes any scaled grid; `origin` only seeds the rate encoder.
pub fn encode_values(
    values: ArrayView2<f32>,
    origin: (usize, usize),
    spec: &EncoderSpec,
) -> Result<SpikeTrain> {
    spec.validate()?;
    let e = spec.exposure;
    let th = spec.delta_threshold;
    match spec.method {
        Method::Latency => encode_latency(values, e),
        Method::Rate => encode_rate(values, origin, e, spec.seed),
        Method::Delta => encode_delta(values, th),
        Method::DeltaExposure => encode_delta_exposure(values, e, th),
        Method::SfFirst => encode_step_forward(values, e, StepForwardMode::First, th),
        Method::SfDirect => encode_step_forward(values, e, StepForwardMode::Direct, th),
        Method::SfLatency => encode_step_forward(values, e, StepForwardMode::Latency, th),
    }
}
