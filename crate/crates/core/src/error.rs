use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("index out of bounds: {0}")]
    Bounds(String),

    /// The requested target length cannot partition the input under the
    /// segment-length cap.
    #[error(
        "infeasible schedule: need T' <= T <= T' * U, got T = {frames}, T' = {target}, \
         T' * U = {}",
        target.saturating_mul(*max_seg)
    )]
    Infeasible {
        frames: usize,
        target: usize,
        max_seg: usize,
    },

    /// A self-check inside a benchmark or cross-validation run failed.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 1 for I/O, format and verification failures, 2 for invalid or
    /// infeasible inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format(_) | Error::Verification(_) => 1,
            Error::Validation(_) | Error::Bounds(_) | Error::Infeasible { .. } => 2,
        }
    }
}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::Validation(format!($($arg)*))
    };
}

macro_rules! malformed {
    ($($arg:tt)*) => {
        $crate::error::Error::Format(format!($($arg)*))
    };
}

pub(crate) use invalid;
pub(crate) use malformed;
