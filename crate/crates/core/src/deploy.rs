//! Back-of-the-envelope sizing for neuromorphic deployment.
//!
//! Each chip takes a fixed number of input channels and draws power inside
//! a fixed band; the clock must fit every exposure step's operations into
//! one integration period.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChipSpec {
    pub inputs_per_chip: usize,
    /// Watts.
    pub power_min: f64,
    pub power_max: f64,
}

impl Default for ChipSpec {
    fn default() -> Self {
        Self {
            inputs_per_chip: 8,
            power_min: 216e-6,
            power_max: 550e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentEstimate {
    pub chips: usize,
    pub power_min_w: f64,
    pub power_max_w: f64,
    pub min_clock_hz: f64,
    pub notes: Vec<String>,
}

/// Chips, power band and minimum clock for one baseline.
pub fn estimate_deployment(
    channels: usize,
    exposure: usize,
    ops_per_exposure: f64,
    integration_time_s: f64,
    chip: &ChipSpec,
) -> Result<DeploymentEstimate> {
    if channels == 0 || exposure == 0 || chip.inputs_per_chip == 0 {
        return Err(Error::Config(
            "channels, exposure and chip inputs must be positive".into(),
        ));
    }
    if !(ops_per_exposure > 0.0 && integration_time_s > 0.0) {
        return Err(Error::Config(
            "operations and integration time must be positive".into(),
        ));
    }
    let chips = channels.div_ceil(chip.inputs_per_chip);
    let min_clock_hz = exposure as f64 * ops_per_exposure / integration_time_s;
    let notes = vec![format!(
        "clock = exposure x ops / integration = {:.3} MHz; a quoted 32 MHz minimum does not follow from these inputs",
        min_clock_hz / 1e6
    )];
    Ok(DeploymentEstimate {
        chips,
        power_min_w: chips as f64 * chip.power_min,
        power_max_w: chips as f64 * chip.power_max,
        min_clock_hz,
        notes,
    })
}
