use thiserror::Error;

use crate::geokit::Frame;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frame mismatch: expected {expected:?}, got {actual:?}")]
    FrameMismatch { expected: Frame, actual: Frame },

    #[error("coincident points: {0}")]
    CoincidentPoints(&'static str),

    #[error("invalid value for {name}: {value} (allowed: {allowed})")]
    OutOfRange {
        name: String,
        value: String,
        allowed: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate channel")]
    DegenerateChannel,

    #[error("zero-norm combiner")]
    ZeroCombiner,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "insufficient visibility: {available} jointly visible satellites, {required} required"
    )]
    InsufficientVisibility { available: usize, required: usize },

    #[error("at slot {slot}: {source}")]
    AtSlot {
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("target rate {target} bps/Hz unreachable: {achieved} bps/Hz at the bracket maximum")]
    Unreachable { target: f64, achieved: f64 },

    #[error("scenario line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown scenario key `{0}`")]
    UnknownKey(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn out_of_range(
        name: impl Into<String>,
        value: impl std::fmt::Display,
        allowed: impl Into<String>,
    ) -> Self {
        Error::OutOfRange {
            name: name.into(),
            value: value.to_string(),
            allowed: allowed.into(),
        }
    }

    pub(crate) fn at_slot(self, slot: usize) -> Self {
        match self {
            e @ Error::AtSlot { .. } => e,
            e => Error::AtSlot {
                slot,
                source: Box::new(e),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
