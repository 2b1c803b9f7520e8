use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum DriftError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// A CSV cell that could not be parsed. `row` is 1-based and counts data rows
    /// (the header is row 0).
    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    /// A malformed line in a JSON-lines stream file (1-based line number).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl DriftError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        DriftError::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        DriftError::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        DriftError::Precondition(msg.into())
    }

    /// True for errors caused by bad input data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            DriftError::Ingest { .. } | DriftError::Parse { .. } | DriftError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, DriftError>;
