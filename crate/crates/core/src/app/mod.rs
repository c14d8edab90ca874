//! Experiment configuration and sweeps, as driven by the `fedlogit` binary.

pub mod config;
pub mod sweep;

pub use config::{parse_config, parse_config_str, ExperimentConfig, Overrides, OUTPUT_ENV};
pub use sweep::{dump_artifacts, reproduce, run, run_cell_on, CellFailure, ClientDensityFile, RunSummary};
