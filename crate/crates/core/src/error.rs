//! Crate-wide error type.

use std::fmt;

/// Errors produced by parsing, validation, and metric computation.
#[derive(Debug)]
pub enum Error {
    /// A line of input could not be parsed; `line` is 1-based.
    Parse { line: usize, msg: String },
    /// A record violated an invariant (probability range, label range,
    /// strict-mode sum check). `line` is set when known.
    InvalidRecord { line: Option<usize>, msg: String },
    /// An operation received an argument outside its domain.
    InvalidArgument(String),
    /// A metric over an empty record set.
    EmptyRecordSet,
    /// SCE/ACE require one class count across all records.
    MixedClassCount { expected: usize, found: usize },
    /// A `--groupby` key that no record carries.
    UnknownGroupField(String),
    /// A comparison baseline with no matching group.
    MissingBaseline(String),
    /// Training diverged (bad learning rate).
    NonFiniteLoss { epoch: usize },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, msg } => write!(f, "line {line}: {msg}"),
            Error::InvalidRecord { line: Some(l), msg } => {
                write!(f, "line {l}: invalid record: {msg}")
            }
            Error::InvalidRecord { line: None, msg } => write!(f, "invalid record: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::EmptyRecordSet => write!(f, "empty record set"),
            Error::MixedClassCount { expected, found } => {
                write!(f, "mixed class counts: expected K={expected}, found K={found}")
            }
            Error::UnknownGroupField(k) => write!(f, "unknown group field: {k:?}"),
            Error::MissingBaseline(v) => write!(f, "baseline value {v:?} matches no group"),
            Error::NonFiniteLoss { epoch } => {
                write!(f, "non-finite training loss at epoch {epoch} (learning rate too high?)")
            }
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
