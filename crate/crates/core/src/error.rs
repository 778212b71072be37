use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("position {value} outside the admissible range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("particles not strictly increasing at index {index} ({left} >= {right})")]
    NonMonotone { index: usize, left: f64, right: f64 },

    #[error("density does not provide derivative of order {0}")]
    MissingDerivative(usize),

    #[error("density is not smooth enough to drive a flow")]
    NonSmoothDensity,

    #[error("spacing collapse at index {index}, time {time}: N*spacing = {scaled_spacing}")]
    SpacingCollapse { index: usize, time: f64, scaled_spacing: f64 },

    #[error("slope {slope} at node {index} left the admissible band [{lo}, {hi}] (time {time})")]
    SlopeViolation { index: usize, time: f64, slope: f64, lo: f64, hi: f64 },

    #[error("non-positive density value {value} at cell {index} (time {time})")]
    PositivityLoss { index: usize, time: f64, value: f64 },

    #[error("non-finite value encountered at time {time}")]
    NonFinite { time: f64 },

    #[error("measures have different total mass ({0} vs {1})")]
    MassMismatch(f64, f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("time samples are not synchronized")]
    Desynchronized,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QuantError {
    fn from(e: std::io::Error) -> Self {
        QuantError::Io(e.to_string())
    }
}

impl From<csv::Error> for QuantError {
    fn from(e: csv::Error) -> Self {
        QuantError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QuantError>;
