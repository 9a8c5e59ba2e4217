//! Command line driver for `sgnn-core`: single training runs, method
//! comparisons over seeds, hyperparameter sweeps, clock benchmarks and
//! dataset utilities.
//!
//! Every run directory holds its CSV output next to a `manifest.txt` of
//! fully resolved `key=value` settings; passing that manifest back with
//! `--config` reproduces the CSV byte for byte.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod error;
pub mod settings;

pub use error::{CliError, CliResult};
pub use settings::Settings;
