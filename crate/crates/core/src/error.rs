use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state index {index} out of range for {n_states} states")]
    StateOutOfRange { index: usize, n_states: usize },

    #[error("planning did not converge within {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("invalid demonstrations: {0}")]
    InvalidDemos(String),

    #[error("{path}: row {row}: {message}")]
    Row { path: PathBuf, row: usize, message: String },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("likelihood cache does not match the MDP: {0}")]
    CacheMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Validation problems (exit code 1) versus runtime failures (exit code 2).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidMdp(_)
                | Error::InvalidArgument(_)
                | Error::StateOutOfRange { .. }
                | Error::InvalidDemos(_)
                | Error::Row { .. }
                | Error::CacheMismatch(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
