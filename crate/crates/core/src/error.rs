use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("tape does not belong to this network ({0})")]
    StaleTape(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite (leading minor {minor} failed)")]
    NotPositiveDefinite { minor: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing ticker `{0}` in price file")]
    MissingTicker(String),

    #[error("fewer than 2 common dates across tickers")]
    TooFewDates,

    #[error("empty anchor range: need {needed} rows, panel has {available}")]
    EmptyAnchorRange { needed: usize, available: usize },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("transport problem of size {rows}x{cols} exceeds the exact-solver cap {cap}; use the sinkhorn solver")]
    CapExceeded { rows: usize, cols: usize, cap: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
