use serde::{Deserialize, Serialize};

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without a strict improvement in validation loss.
///
/// The loss of the untrained network is the initial reference, so with a
/// loss that never improves the rate first drops for epoch `patience + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    best: f64,
    stale: usize,
    reductions: usize,
}

impl PlateauScheduler {
    pub fn new(lr0: f64, factor: f64, patience: usize, baseline: f64) -> Self {
        Self {
            lr: lr0,
            factor,
            patience,
            best: baseline,
            stale: 0,
            reductions: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn reductions(&self) -> usize {
        self.reductions
    }

    /// Records an epoch's validation loss; returns the rate for the next.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.factor;
                self.reductions += 1;
                self.stale = 0;
            }
        }
        self.lr
    }
}
