use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate fit: no {empty_class} years in the CAIDI series")]
    DegenerateFit { empty_class: &'static str },

    #[error("config error: {0}")]
    Config(String),

    #[error("portfolio {0:?} is not in the cost table")]
    MissingPortfolio(Vec<u64>),

    #[error("illegal action: {0}")]
    IllegalAction(String),

    #[error("config hash mismatch: artifact {artifact} was produced for {found}, active config is {expected}")]
    HashMismatch {
        artifact: String,
        expected: String,
        found: String,
    },

    #[error("state space of {states} states exceeds the enumeration cap of {cap}")]
    EnumerationCap { states: usize, cap: usize },

    #[error("Q-value {value} at period {period} left the admissible range [{lower}, 0]")]
    QOutOfBounds {
        value: f64,
        lower: f64,
        period: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable identifier, used as a machine-parsable prefix by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DegenerateFit { .. } => "degenerate-fit",
            Error::Config(_) => "config",
            Error::MissingPortfolio(_) => "missing-portfolio",
            Error::IllegalAction(_) => "illegal-action",
            Error::HashMismatch { .. } => "hash-mismatch",
            Error::EnumerationCap { .. } => "enumeration-cap",
            Error::QOutOfBounds { .. } => "q-bounds",
            Error::Parse(_) => "parse",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
