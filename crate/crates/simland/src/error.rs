//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad hyperparameters, incompatible method/task, malformed config file.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid or unreadable data: ragged CSV rows, non-numeric cells, empty inputs,
    /// dimension mismatches between points and models.
    #[error("data error: {0}")]
    Data(String),

    /// Numeric failure during computation: non-finite similarity values, diverging solver state.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn dim_mismatch(expected: usize, got: usize) -> Self {
        Error::Data(format!("dimension mismatch: expected {expected}, got {got}"))
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 1 config, 2 data/io, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) | Error::Io { .. } => 2,
            Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
