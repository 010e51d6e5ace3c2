//! The run configuration: one JSON document for every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spikeflag::data::SynthConfig;
use spikeflag::deploy::ChipSpec;
use spikeflag::encoding::EncoderSpec;
use spikeflag::network::NetworkSpec;
use spikeflag::neuron::LifParams;
use spikeflag::pipeline::PreprocessConfig;
use spikeflag::training::{SweepSpace, TrainConfig};
use spikeflag::{Error, Result};

use crate::PreprocessFlags;

/// Synthetic dataset shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub count: usize,
    pub channels: usize,
    pub steps: usize,
    pub contamination: f64,
    pub synth: SynthConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            count: 64,
            channels: 64,
            steps: 64,
            contamination: 0.0276,
            synth: SynthConfig::default(),
        }
    }
}

/// Network shape; the widths follow from the encoder on 32-channel patches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_width: usize,
    pub num_hidden_layers: usize,
    pub neuron: LifParams,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_width: 64,
            num_hidden_layers: 2,
            neuron: LifParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeployConfig {
    pub channels: usize,
    pub exposure: usize,
    pub ops_per_exposure: f64,
    pub integration_time_s: f64,
    pub chip: ChipSpec,
}

impl Default for DeployConfig {
    fn default() -> Self {
        Self {
            channels: 512,
            exposure: 64,
            ops_per_exposure: 1e6,
            integration_time_s: 3.52,
            chip: ChipSpec::default(),
        }
    }
}

/// Input locations. Command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the generator, encoder, network and training alike.
    pub seed: u64,
    pub data: DataConfig,
    pub preprocess: PreprocessConfig,
    pub encoder: EncoderSpec,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub sweep: SweepSpace,
    pub deploy: DeployConfig,
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies command-line overrides and pushes the run seed everywhere.
    pub fn resolve(mut self, seed: Option<u64>, pre: &PreprocessFlags) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.encoder.seed = self.seed;
        self.train.seed = self.seed;
        self.sweep.seed = self.seed;
        if let Some((a, b)) = pre.scale_sigmas {
            self.preprocess.scaling.lower_sigmas = a;
            self.preprocess.scaling.upper_sigmas = b;
        }
        if pre.no_divnorm {
            self.preprocess.divnorm = None;
        }
        if let Some(dn) = &mut self.preprocess.divnorm {
            if let Some(k) = pre.divnorm_k {
                dn.kernel_size = k;
            }
            if pre.no_clamp {
                dn.clamp_output = false;
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        if !(2..=6).contains(&n.num_hidden_layers) {
            return Err(Error::Config(format!(
                "num_hidden_layers = {} outside [2, 6]",
                n.num_hidden_layers
            )));
        }
        if n.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be positive".into()));
        }
        if !(self.data.contamination > 0.0 && self.data.contamination < 1.0) {
            return Err(Error::Config("contamination must lie in (0, 1)".into()));
        }
        n.neuron.validate()?;
        self.preprocess.scaling.validate()?;
        self.encoder.validate()?;
        self.train.validate()?;
        self.sweep.validate()
    }

    pub fn network_spec(&self) -> NetworkSpec {
        let m = self.encoder.method;
        NetworkSpec {
            input_width: m.input_width(spikeflag::data::PATCH_SIZE),
            hidden_width: self.network.hidden_width,
            num_hidden_layers: self.network.num_hidden_layers,
            output_width: m.output_width(spikeflag::data::PATCH_SIZE),
            neuron: self.network.neuron,
            seed: self.seed,
        }
    }
}
