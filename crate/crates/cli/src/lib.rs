//! Command layer of the `pairsource` simulator: configuration, reports and
//! one entry point per experiment.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_bell, cmd_chsh, cmd_hom, cmd_qpm, cmd_rates, cmd_spectrum, RunOptions, RunReport};
pub use config::ExperimentConfig;
pub use error::CliError;
