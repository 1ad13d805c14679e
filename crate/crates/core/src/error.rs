use thiserror::Error;

/// Errors produced anywhere in the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("header line {line}: {message}")]
    Header { line: usize, message: String },

    #[error("unsupported storage format {0}")]
    UnsupportedFormat(u32),

    #[error("signal file truncated: expected {expected} bytes, found {actual}")]
    TruncatedSignal { expected: usize, actual: usize },

    #[error("annotation stream: {0}")]
    Annotation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("corrupt file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
