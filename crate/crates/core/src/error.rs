use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid sample at index {index}: {value}")]
    InvalidSample { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid stream: {0}")]
    InvalidStream(String),

    #[error("malformed wire sequence: {0}")]
    MalformedWire(String),

    #[error("index {index} out of range for layer {layer} (rows = {rows})")]
    IndexOutOfRange { layer: usize, index: u32, rows: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("scorer error: {0}")]
    ScorerError(String),

    /// A file that parsed far enough to be recognised but whose contents are wrong.
    #[error("data format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
