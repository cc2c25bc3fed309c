//! Experiment pipeline on top of `rsoup-core`: configuration files, the
//! stage orchestration, CSV/JSON outputs and the subcommands of the `rsoup`
//! binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{ConfigError, ExperimentConfig};
pub use pipeline::Experiment;
