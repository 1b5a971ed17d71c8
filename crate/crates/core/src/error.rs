use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two parameter vectors (or a vector and a model) disagree on layout.
    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("non-finite value in parameter segment `{segment}`")]
    NonFinite { segment: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed binary input; `offset` is the byte position of the bad field.
    #[error("format error in {path} at byte offset {offset}: {msg}")]
    Format { path: PathBuf, offset: u64, msg: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("round {round} failed: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
