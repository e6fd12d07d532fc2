//! Cross-entropy loss, Adam, learning-rate schedules, early stopping and the
//! training loop.

mod adam;
mod loss;
mod schedule;
mod train;

pub use adam::{AdamConfig, AdamState};
pub(crate) use loss::argmax;
pub use loss::{accuracy, categorical_cross_entropy, LossInput, PROBABILITY_FLOOR};
pub use schedule::{warmup_schedule, EarlyStopState, PlateauSchedule, MIN_DELTA};
pub use train::{evaluate_loss, train, EpochRecord, History, StopReason, TrainConfig, TrainOutcome};
