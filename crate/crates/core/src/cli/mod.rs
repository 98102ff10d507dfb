//! Experiment runner: configuration, time loop and CSV output.

pub mod config;
pub mod runner;

pub use config::{parse_config, parse_config_with_overrides, Problem, RunConfig, Scheme, TransferKind};
pub use runner::{run, simulate, write_outputs, RunOutput, SeriesRow};
