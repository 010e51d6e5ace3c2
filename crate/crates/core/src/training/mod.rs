//! Losses, optimiser, learning-rate schedule, the training loop and the
//! hyper-parameter sweep.

mod adam;
mod loss;
mod schedule;
mod sweep;
mod train;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use loss::{loss, LossKind, LossSpec};
pub use schedule::PlateauScheduler;
pub use sweep::{
    draw_trials, select_winner, sweep, write_trial_table, MetricSummary, SweepBase, SweepOutcome,
    SweepSpace, TrialParams, TrialRecord,
};
pub use train::{fit, split_indices, train, EpochRecord, History, TrainConfig, TrainOutcome};
