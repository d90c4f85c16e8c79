use std::path::PathBuf;

/// Unified error type for the whole pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent with the data.
    #[error("config error: {0}")]
    Config(String),

    /// A file could not be parsed; reports path, 1-based line, and cause.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Input data violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A pairwise table would exceed the configured size cap.
    #[error("pairwise table for {n} samples exceeds cap of {cap} (need {n} <= cap)")]
    Capacity { n: usize, cap: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: 1 for bad input, 2 for runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Validation(_) => 1,
            Error::Capacity { .. } | Error::Io { .. } => 2,
        }
    }
}
