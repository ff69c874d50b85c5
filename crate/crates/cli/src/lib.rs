//! Subcommands of the `alp` tool. Each writes its artifacts plus the fully
//! resolved `config.json` into the output directory.

pub mod commands;
pub mod config;

use std::path::Path;

use serde::Serialize;

pub use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration; exit status 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or inconsistent data, or a violated invariant; exit status 2.
    #[error(transparent)]
    Data(#[from] alp_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(alp_core::Error::from)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
