use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GtdaError>;

#[derive(Debug, Error)]
pub enum GtdaError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("invalid argument: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("backward called with a cache from a different parameter version (cache {cache}, model {model})")]
    StaleCache { cache: u64, model: u64 },
}

impl GtdaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GtdaError::Io {
            path: path.into(),
            source,
        }
    }
}
