use thiserror::Error;

/// Errors raised by the library surface.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("genome must have {expected} elements, got {actual}")]
    GenomeLength { expected: usize, actual: usize },

    #[error("genome element {index} ({name}) = {value} is outside [0, 1]")]
    GenomeElement {
        index: usize,
        name: &'static str,
        value: f64,
    },

    #[error("parameter {name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("phase {0} is outside [0, 1)")]
    PhaseOutOfRange(f64),

    #[error("foot target unreachable by {shortfall:.6} mm")]
    Unreachable { shortfall: f64 },

    #[error("malformed trace: {0}")]
    MalformedTrace(&'static str),

    #[error("individual {0} has not been evaluated")]
    Unevaluated(usize),

    #[error("individual {individual} has no evaluations on surface {surface}")]
    MissingSurface { individual: String, surface: String },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
