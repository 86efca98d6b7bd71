//! Command implementations behind the `permimpact` binary. Each command
//! writes its CSV outputs, the resolved `config.toml` and a `manifest.toml`
//! into one output directory. Outputs are deterministic given the config.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Command};
pub use config::ExperimentConfig;
pub use error::CliError;
