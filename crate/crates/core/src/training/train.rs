use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamHyper, AdamState};
use super::loss::{loss, LossSpec};
use super::schedule::PlateauScheduler;
use crate::data::Dataset;
use crate::encoding::EncoderSpec;
use crate::error::{Error, Result};
use crate::network::{Mode, Network, NetworkParams, NetworkSpec};
use crate::pipeline::{check_widths, prepare, PreprocessConfig, Sample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    /// Fraction of training spectrograms held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
    /// Keep the decay rates at their initial values.
    pub freeze_decay: bool,
    /// Overrides the loss normally paired with the encoding.
    pub loss: Option<LossSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 36,
            lr0: 1e-3,
            plateau_patience: 10,
            plateau_factor: 0.5,
            val_fraction: 0.2,
            seed: 0,
            freeze_decay: false,
            loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return bad("initial learning rate must be positive");
        }
        if self.plateau_patience == 0 {
            return bad("plateau patience must be positive");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau factor must lie in (0, 1)");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        if let Some(l) = &self.loss {
            l.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialise") + "\n")
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub history: History,
    /// Optimiser steps taken.
    pub steps: u64,
}

/// Seeded split of `n` items into sorted `(train, validation)` indices.
/// Keeps at least one item on each side when `n >= 2`.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = if n < 2 {
        0
    } else {
        ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1)
    };
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

fn sample_loss(net: &Network, s: &Sample, spec: &LossSpec) -> Result<f64> {
    let tape = net.forward(&s.input, Mode::Surrogate)?;
    Ok(loss(&tape.output_array(), &s.target, spec)?.0)
}

fn mean_loss(net: &Network, samples: &[Sample], spec: &LossSpec) -> Result<f64> {
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| sample_loss(net, s, spec))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

fn sample_gradient(net: &Network, s: &Sample, spec: &LossSpec) -> Result<(f64, NetworkParams)> {
    let tape = net.forward(&s.input, Mode::Surrogate)?;
    let (value, grad) = loss(&tape.output_array(), &s.target, spec)?;
    Ok((value, net.backward(&tape, &grad)?))
}

fn prepare_all(
    d: &Dataset,
    idx: &[usize],
    pre: &PreprocessConfig,
    enc: &EncoderSpec,
) -> Result<Vec<Sample>> {
    let per: Vec<Vec<Sample>> = idx
        .par_iter()
        .map(|&i| prepare(&d.train[i], pre, enc))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Trains a fresh network by minibatch BPTT with Adam.
///
/// Gradients are computed in parallel and summed in sample order, so the
/// result does not depend on the number of threads.
pub fn train(
    d: &Dataset,
    enc: &EncoderSpec,
    net_spec: &NetworkSpec,
    cfg: &TrainConfig,
    pre: &PreprocessConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    enc.validate()?;
    let net = Network::new(net_spec.clone())?;
    check_widths(&net, enc)?;
    if d.train.is_empty() {
        return Err(Error::Precondition("training split is empty".into()));
    }
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            network: net,
            history: History::default(),
            steps: 0,
        });
    }
    let (train_idx, val_idx) = split_indices(d.train.len(), cfg.val_fraction, cfg.seed);
    let train_set = prepare_all(d, &train_idx, pre, enc)?;
    let val_set = prepare_all(d, &val_idx, pre, enc)?;
    let spec = cfg.loss.unwrap_or_else(|| LossSpec::for_method(enc.method));
    fit(net, &train_set, &val_set, cfg, &spec)
}

/// Trains `net` on encoded samples, monitoring `val` (or the training set
/// when `val` is empty) for the plateau scheduler.
pub fn fit(
    mut net: Network,
    train_set: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    spec: &LossSpec,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::Precondition("no training samples".into()));
    }
    let spec = *spec;
    let monitor = if val.is_empty() { train_set } else { val };
    let mut history = History::default();

    let frozen = if cfg.freeze_decay {
        net.params.decay_indices()
    } else {
        Vec::new()
    };
    let mut adam = AdamState::new(net.num_parameters());
    let mut sched = PlateauScheduler::new(
        cfg.lr0,
        cfg.plateau_factor,
        cfg.plateau_patience,
        mean_loss(&net, monitor, &spec)?,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let lr = sched.lr();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let parts: Vec<(f64, NetworkParams)> = batch
                .par_iter()
                .map(|&i| sample_gradient(&net, &train_set[i], &spec))
                .collect::<Result<_>>()?;
            let mut grad = net.params.zeros_like();
            for (value, g) in &parts {
                total += value;
                grad.add_assign(g);
            }
            grad.scale(1.0 / batch.len() as f64);
            for &k in &frozen {
                grad.data[k] = 0.0;
            }
            adam_step(
                &mut net.params.data,
                &grad.data,
                &mut adam,
                &AdamHyper::with_lr(lr),
            );
        }
        let val_loss = mean_loss(&net, monitor, &spec)?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_loss,
            lr,
        });
        sched.observe(val_loss);
    }
    Ok(TrainOutcome {
        network: net,
        history,
        steps: adam.t,
    })
}
