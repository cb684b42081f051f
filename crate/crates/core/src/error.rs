use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("insufficient meter window: {days} days observed, at least {min} required")]
    InsufficientWindow { days: u32, min: u32 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: {left} targets vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("zero target at index {0} has no relative gap")]
    ZeroTarget(usize),

    #[error("search space of {size} schedules exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: u64, cap: u64 },

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }
}
