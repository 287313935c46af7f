//! Batch driver: configuration files, run orchestration and result files.

pub mod checks;
pub mod commands;
pub mod config;
pub mod expr;
pub mod output;

pub use commands::{execute, CliError, Command, Options, Outcome};
pub use config::{parse_config, ConfigError, Format, RunConfig};
