//! Optimizer, learning-rate schedule and training loop.

pub mod adam;
pub mod schedule;
pub mod trainer;

pub use adam::Adam;
pub use schedule::{lr_at, LrSchedule};
pub use trainer::{train, StopReason, TrainConfig, TrainRecord, TrainReport, Trainer, Validation};
