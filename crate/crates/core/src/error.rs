use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("event {index}: timestamp {timestamp} precedes {previous} by more than the allowed slack of {slack}")]
    StreamOrder {
        index: usize,
        timestamp: u64,
        previous: u64,
        slack: u64,
    },

    #[error("event {index} at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u32,
        y: u32,
        width: usize,
        height: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry mismatch: expected {expected:?}, got {actual:?}")]
    GeometryMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("unknown scene kind `{0}`")]
    UnknownScene(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Fails with [`Error::GeometryMismatch`] unless both shapes agree.
pub(crate) fn ensure_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::GeometryMismatch { expected, actual })
    }
}
