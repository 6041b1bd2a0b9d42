//! Pipeline commands behind the `gridplan` binary.
//!
//! Each command reads its inputs, checks that chained artifacts carry the
//! expected config hash, writes its outputs into one directory and records
//! them in that directory's `manifest.json`.

pub mod commands;
pub mod manifest;

pub use commands::*;
pub use manifest::{ArtifactRecord, RunManifest};

/// Error surfaced by a command. `code()` is the stable machine tag.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] gridplan::Error),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.code(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
