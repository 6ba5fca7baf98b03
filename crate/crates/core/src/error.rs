use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}: file contains no records")]
    EmptyFile(PathBuf),

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("split '{0}' has no records")]
    EmptySplit(&'static str),

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operation '{0}' cannot be used inside a tensor composite")]
    NotComposable(String),

    #[error("unknown operation '{0}'")]
    UnknownOp(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("no user has a positive test item")]
    NoQualifyingUsers,

    #[error("batch drawn from '{got}' split where '{expected}' was required")]
    WrongSplit {
        expected: &'static str,
        got: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 1 for bad input or configuration, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidRatios(_) | Error::UnknownOp(_) | Error::NotComposable(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
