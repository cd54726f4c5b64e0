use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing config entry; `key` is the dotted path.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Numeric(#[from] dwf_core::Error),

    /// Files were written but some scan points failed.
    #[error("{failed} of {total} scan points failed")]
    PartialScan { failed: usize, total: usize },

    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv error on {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Numeric(dwf_core::Error::Domain(_)) => 2,
            CliError::Numeric(_) => 3,
            CliError::PartialScan { .. } => 4,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
