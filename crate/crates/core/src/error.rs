//! Crate-wide error type.

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A column state's length does not match the model's row count.
    DimensionMismatch { expected: usize, got: usize },
    /// A parameter is outside its documented range.
    InvalidParameter(String),
    /// A potential table violates the nonnegativity or support requirements.
    InvalidPotential(String),
    /// The requested exact computation exceeds the documented size limits.
    SizeLimit(String),
    /// The model admits no configuration with positive weight.
    EmptySupport,
    /// Every particle's resampling weight vanished at the given step.
    SupportCollapse { step: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "column state has length {got}, model has {expected} rows")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidPotential(msg) => write!(f, "invalid potential: {msg}"),
            Error::SizeLimit(msg) => write!(f, "size limit exceeded: {msg}"),
            Error::EmptySupport => write!(f, "model has no configuration with positive weight"),
            Error::SupportCollapse { step } => {
                write!(f, "all resampling weights are zero at step {step}")
            }
        }
    }
}

impl core::error::Error for Error {}
