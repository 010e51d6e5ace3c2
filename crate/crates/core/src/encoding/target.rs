use ndarray::{Array2, ArrayView2};

use super::encode::background_step;
use super::{EncoderSpec, Method, SpikeTrain};

/// Supervision signal for one patch.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// Desired output raster.
    Spikes(SpikeTrain),
    /// Desired firing rate per channel and original time step, `[F, T]`.
    Rates { rates: Array2<f64>, exposure: usize },
}

impl Target {
    /// Total steps the network must run for.
    pub fn steps(&self) -> usize {
        match self {
            Target::Spikes(s) => s.steps(),
            Target::Rates { rates, exposure } => rates.ncols() * exposure,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Target::Spikes(s) => s.channels(),
            Target::Rates { rates, .. } => rates.nrows(),
        }
    }
}

/// Encodes a supervision mask for the given scheme.
///
/// Latency family: RFI spikes on local step 0, background on the
/// background step `E - 1` (silent when `E = 1`). Rate: `rate_hi` for RFI,
/// `rate_lo` otherwise. Delta: a positive-block spike where a run of RFI
/// starts and a negative-block spike on the first clean step after it.
pub fn encode_target(mask: ArrayView2<bool>, spec: &EncoderSpec) -> Target {
    let (f, t) = mask.dim();
    let e = spec.effective_exposure();
    match spec.method {
        Method::Rate => Target::Rates {
            rates: mask.mapv(|m| if m { spec.rate_hi } else { spec.rate_lo }),
            exposure: e,
        },
        Method::Delta => {
            let mut out = SpikeTrain::zeros(f, t, 1, true);
            for i in 0..f {
                let mut prev = false;
                for j in 0..t {
                    let m = mask[[i, j]];
                    if m && !prev {
                        out.bits[[i, j]] = 1;
                    } else if !m && prev {
                        out.bits[[f + i, j]] = 1;
                    }
                    prev = m;
                }
            }
            Target::Spikes(out)
        }
        _ => {
            let mut out = SpikeTrain::zeros(f, t, e, false);
            let quiet = background_step(e);
            for ((i, j), &m) in mask.indexed_iter() {
                if m {
                    out.bits[[i, j * e]] = 1;
                } else if let Some(b) = quiet {
                    out.bits[[i, j * e + b]] = 1;
                }
            }
            Target::Spikes(out)
        }
    }
}
