//! Experiment runner for the softqd toolkit: TOML configs, seeded runs, metric
//! CSVs, parameter sweeps and property checks.

pub mod check;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{Algorithm, Precision, RunConfig, SweepParam};
pub use error::{CliError, CliResult};
pub use experiment::{run, sweep, Summary};
