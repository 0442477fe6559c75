use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SknaError>;

#[derive(Debug, Error)]
pub enum SknaError {
    /// Malformed or missing file structure (headers, columns, required fields).
    #[error("format error: {0}")]
    Format(String),

    /// Signal content violates an invariant. `index` is the offending sample
    /// (or row) when one can be pinned down.
    #[error("data error{}: {message}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    Data {
        message: String,
        index: Option<usize>,
    },

    /// Invalid parameters: cutoffs beyond Nyquist, unsupported rates, unknown components.
    #[error("config error: {0}")]
    Config(String),

    /// Statistical model cannot be fitted (singular design, zero variance).
    #[error("model error: {0}")]
    Model(String),

    /// Segment deliberately left out of analysis (for example VAS = 0).
    #[error("segment excluded: {0}")]
    ExcludedSegment(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SknaError {
    pub(crate) fn data(message: impl Into<String>) -> Self {
        SknaError::Data {
            message: message.into(),
            index: None,
        }
    }

    pub(crate) fn data_at(message: impl Into<String>, index: usize) -> Self {
        SknaError::Data {
            message: message.into(),
            index: Some(index),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        SknaError::Config(message.into())
    }

    pub(crate) fn format(message: impl Into<String>) -> Self {
        SknaError::Format(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SknaError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool: 2 for usage and
    /// configuration problems, 1 for data and model failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SknaError::Config(_) | SknaError::Format(_) => 2,
            _ => 1,
        }
    }
}
