//! Config-driven experiments on viscous thin sheets, writing CSV and JSON artifacts.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{parse_config, parse_config_with, ExperimentConfig, Kind};
pub use error::{CliError, Result};
pub use experiments::{run_experiment, RunArtifacts, Summary};
