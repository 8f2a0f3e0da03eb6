//! Shared error type for the whole pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    /// An event arrived behind the reorder watermark. The offending event is
    /// echoed back so callers can log or dead-letter it.
    #[error("late event (timestamp {timestamp}, value {value}) behind watermark {watermark}")]
    LateEvent {
        timestamp: i64,
        value: f64,
        watermark: i64,
    },

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("detector state corrupt: {0}")]
    StateCorrupt(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
