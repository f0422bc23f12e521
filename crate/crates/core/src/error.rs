use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("data error at record {record}: {message}")]
    Data { record: usize, message: String },

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("determinism error: {0}")]
    Determinism(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("{at}: {source}")]
    At { at: String, source: Box<Error> },
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input files or invalid configuration.
    DataOrConfig,
    /// NaN/Inf losses, failed gradient checks, nondeterminism.
    Numeric,
    /// Programming errors surfaced at runtime (shape or state misuse).
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::Range(_)
            | Error::Format { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Data { .. }
            | Error::Split(_)
            | Error::Io(_) => ErrorClass::DataOrConfig,
            Error::Numeric(_) | Error::Determinism(_) | Error::Normalization(_) => {
                ErrorClass::Numeric
            }
            Error::Shape(_) | Error::State(_) => ErrorClass::Internal,
            Error::At { source, .. } => source.class(),
        }
    }

    /// Prefix with a location such as `epoch 3, batch 1`.
    pub fn at(self, at: impl Into<String>) -> Self {
        Error::At {
            at: at.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with location wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
