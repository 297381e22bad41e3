//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong across the toolkit.
///
/// Variants map onto process exit codes (see [`Error::exit_code`]):
/// failed checks exit 1, configuration and usage problems exit 2, and
/// numeric failures (non-finite values, exhausted skip budgets) exit 3.
#[derive(Debug, Error)]
pub enum Error {
    /// A function was called with arguments that violate its contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A gradient contained NaN or Inf. The pipeline skips such steps;
    /// calling a clip or optimizer op directly with one is an error.
    #[error("non-finite gradient in parameter '{0}'")]
    NonFiniteGradient(String),

    /// A config file or config value is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// A line-oriented file (trace or metrics JSONL) failed to parse.
    #[error("{path}: parse error on line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// The trace holds norm summaries only and cannot supply full tensors.
    #[error("trace is norms-only; full gradient tensors are required here")]
    NormsOnlyTrace,

    /// An I/O failure, always carrying the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A run aborted for numeric reasons (e.g. skip budget exhausted).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A verification command (gradcheck, comparisons) found a violation.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl Error {
    /// Attach path context to an I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 failed check, 2 config/usage,
    /// 3 numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CheckFailed(_) => 1,
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Parse { .. }
            | Error::NormsOnlyTrace
            | Error::Io { .. } => 2,
            Error::NonFiniteGradient(_) | Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
