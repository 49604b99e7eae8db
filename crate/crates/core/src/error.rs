use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("conductance overflow: {} weight(s) exceed g_max, first at {:?}", .entries.len(), .entries.first())]
    Overflow { entries: Vec<(usize, usize)> },

    #[error("memory capacity of {capacity} entries exhausted")]
    CapacityExhausted { capacity: usize },

    #[error("memory bank is empty")]
    EmptyBank,

    #[error("insufficient data for class {class}: need {needed} vectors, have {have}")]
    InsufficientData {
        class: String,
        needed: usize,
        have: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
