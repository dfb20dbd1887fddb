//! Experiment harness around the `qipf` library: TOML configs, presets,
//! artifact writing and optional SVG plots.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod presets;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiment::{resolve_out_dir, run_experiment, RunOutput, OUT_DIR_ENV};
