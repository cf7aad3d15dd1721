use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, VeError>;

#[derive(Debug, Error)]
pub enum VeError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint format: {0}")]
    Format(String),
}

impl VeError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        VeError::Shape(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        VeError::Io {
            context: context.into(),
            source,
        }
    }
}
