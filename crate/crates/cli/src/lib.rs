//! Figure-data generator built on `faraday-cavity`.
//!
//! Each command writes CSV files plus a `manifest.toml` that reproduces the
//! run when passed back with `--config`.

pub mod checks;
pub mod commands;
pub mod config;

pub use commands::{run, Report};
pub use config::{resolve, Command, GridSpec, Overrides, Resolved, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for numerical and I/O failures, 2 for bad configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}
