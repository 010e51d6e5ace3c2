use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{train, TrainConfig};
use crate::data::{Dataset, PATCH_SIZE};
use crate::encoding::EncoderSpec;
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::network::NetworkSpec;
use crate::neuron::LifParams;
use crate::pipeline::{evaluate_dataset, PreprocessConfig};

/// Ranges for the random search. Bounds are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpace {
    pub hidden_widths: Vec<usize>,
    pub num_layers: (usize, usize),
    pub beta: (f64, f64),
    pub exposure: (usize, usize),
    pub trials: usize,
    pub seed: u64,
}

impl Default for SweepSpace {
    fn default() -> Self {
        Self {
            hidden_widths: vec![128, 256, 512],
            num_layers: (2, 6),
            beta: (0.5, 0.99),
            exposure: (1, 64),
            trials: 10,
            seed: 0,
        }
    }
}

impl SweepSpace {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("a sweep needs at least one trial".into());
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        let (l0, l1) = self.num_layers;
        if !(2 <= l0 && l0 <= l1 && l1 <= 6) {
            return bad(format!("layer range {l0}..={l1} outside [2, 6]"));
        }
        let (b0, b1) = self.beta;
        if !(0.0 < b0 && b0 <= b1 && b1 < 1.0) {
            return bad(format!("beta range {b0}..={b1} outside (0, 1)"));
        }
        let (e0, e1) = self.exposure;
        if !(1 <= e0 && e0 <= e1 && e1 <= 64) {
            return bad(format!("exposure range {e0}..={e1} outside [1, 64]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub hidden_width: usize,
    pub num_layers: usize,
    pub beta: f64,
    pub exposure: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub f1: f64,
}

impl From<&EvalReport> for MetricSummary {
    fn from(r: &EvalReport) -> Self {
        Self {
            accuracy: r.accuracy,
            auroc: r.auroc,
            auprc: r.auprc,
            f1: r.f1,
        }
    }
}

impl MetricSummary {
    fn values(&self) -> [Option<f64>; 4] {
        [Some(self.accuracy), self.auroc, self.auprc, Some(self.f1)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub params: TrialParams,
    pub metrics: MetricSummary,
}

/// Everything a trial shares with the others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct SweepBase {
    /// Method and thresholds; the exposure is drawn per trial.
    pub encoder: EncoderSpec,
    /// Neuron order, threshold and surrogate; beta is drawn per trial.
    pub neuron: LifParams,
    pub train: TrainConfig,
    pub preprocess: PreprocessConfig,
    pub network_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<TrialRecord>,
    pub winner: usize,
}

/// Draws `space.trials` configurations uniformly from the space.
pub fn draw_trials(space: &SweepSpace) -> Result<Vec<TrialParams>> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    Ok((0..space.trials)
        .map(|_| TrialParams {
            hidden_width: *space
                .hidden_widths
                .choose(&mut rng)
                .expect("validated non-empty"),
            num_layers: rng.random_range(space.num_layers.0..=space.num_layers.1),
            beta: rng.random_range(space.beta.0..=space.beta.1),
            exposure: rng.random_range(space.exposure.0..=space.exposure.1),
        })
        .collect())
}

/// The trial that leads in the most of accuracy, AUROC, AUPRC and F1.
/// Every trial tied for the best value of a metric leads it. Ties in the
/// count go to the higher F1, then to the earlier trial.
pub fn select_winner(metrics: &[MetricSummary]) -> Option<usize> {
    let mut leads = vec![0usize; metrics.len()];
    for k in 0..4 {
        let best = metrics
            .iter()
            .filter_map(|m| m.values()[k])
            .fold(f64::NEG_INFINITY, f64::max);
        for (i, m) in metrics.iter().enumerate() {
            if m.values()[k] == Some(best) {
                leads[i] += 1;
            }
        }
    }
    (0..metrics.len()).reduce(|a, b| {
        let better = leads[b] > leads[a] || (leads[b] == leads[a] && metrics[b].f1 > metrics[a].f1);
        if better {
            b
        } else {
            a
        }
    })
}

/// Trains and evaluates every drawn configuration on the test split.
pub fn sweep(d: &Dataset, base: &SweepBase, space: &SweepSpace) -> Result<SweepOutcome> {
    if d.test.is_empty() {
        return Err(Error::Precondition("sweep needs a test split".into()));
    }
    let trials = draw_trials(space)?;
    let records: Vec<TrialRecord> = trials
        .par_iter()
        .enumerate()
        .map(|(trial, p)| {
            let mut enc = base.encoder.clone();
            enc.exposure = p.exposure;
            let mut neuron = base.neuron;
            neuron.beta = p.beta;
            neuron.alpha = p.beta;
            let spec = NetworkSpec {
                input_width: enc.method.input_width(PATCH_SIZE),
                hidden_width: p.hidden_width,
                num_hidden_layers: p.num_layers,
                output_width: enc.method.output_width(PATCH_SIZE),
                neuron,
                seed: base.network_seed,
            };
            let out = train(d, &enc, &spec, &base.train, &base.preprocess)?;
            let (report, _) = evaluate_dataset(&out.network, &enc, &base.preprocess, &d.test)?;
            Ok(TrialRecord {
                trial,
                params: *p,
                metrics: MetricSummary::from(&report),
            })
        })
        .collect::<Result<_>>()?;
    let summaries: Vec<_> = records.iter().map(|r| r.metrics).collect();
    let winner = select_winner(&summaries).expect("at least one trial");
    Ok(SweepOutcome { records, winner })
}

/// One JSON record per trial.
pub fn write_trial_table(records: &[TrialRecord], path: &Path) -> Result<()> {
    let text: String = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialise") + "\n")
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
