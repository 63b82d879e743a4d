//! Experiment driver: configuration, training with validation-based model
//! selection, evaluation, significance testing and bucketed reports.

pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod report;
pub mod runlog;
pub mod sigtest;
pub mod train;

pub use config::{ExperimentConfig, ObjectiveKind, TaskKind};
pub use data::TaskData;
pub use error::{HarnessError, Result};
pub use evaluate::{evaluate, EvalReport, Metric};
pub use runlog::RunLog;
pub use sigtest::significance;
pub use train::{train, Trainer, Validator};
