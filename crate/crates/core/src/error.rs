use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation, training and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate plant parameters: {0}")]
    DegeneratePlant(String),

    #[error("invalid parameter `{key}`: {msg}")]
    InvalidParam { key: String, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duty ratio {0} outside [-1, 1]")]
    DutyOutOfRange(f64),

    #[error("training aborted at epoch {epoch}: {reason}")]
    TrainingAborted { epoch: usize, reason: String },

    #[error("no peaks detected in {0} log")]
    NoPeaks(&'static str),

    #[error("numerical check failed: {0}")]
    CheckFailed(String),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed {what}: {msg}")]
    Format { what: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidParam {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code: 1 for usage/config/input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) | Error::DegeneratePlant(_) | Error::TrainingAborted { .. } | Error::CheckFailed(_) => {
                2
            }
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
