//! Configuration loading and subcommand implementations behind the
//! `pkm-forge` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::Criterion;
pub use config::{Overrides, RunConfig};
pub use error::CliError;
