use std::path::PathBuf;

/// Errors produced by the qscan library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A single input record (JSONL line, CSV row) could not be parsed or validated.
    #[error("{source_name}: record {line}: {message}")]
    Record {
        source_name: String,
        line: u64,
        message: String,
    },

    /// The caller passed arguments that violate an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A statistic is mathematically undefined for the given data
    /// (constant input, zero chance-agreement denominator, ...).
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("model format: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(source_name: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Record {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed or invalid input data rather than
    /// by the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
