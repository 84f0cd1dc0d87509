use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequence has {len} frames but at least {need} are required")]
    InsufficientLength { len: usize, need: usize },

    #[error("data integrity violated: {0}")]
    Integrity(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: round1={loss_round1}, round2={loss_round2}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss_round1: f64,
        loss_round2: f64,
    },

    #[error("incompatible checkpoint: {0}")]
    Compatibility(String),

    #[error("nothing to report: {0}")]
    Empty(String),

    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
