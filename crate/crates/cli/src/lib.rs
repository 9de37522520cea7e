//! Harness around the estimators: configuration, result files, the stdio
//! measurement protocol and the benchmark experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod protocol;
pub mod results;
pub mod stats;

pub use config::{Algorithm, RunConfig, ScheduleSpec};
pub use error::{HarnessError, Result};
