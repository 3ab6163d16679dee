//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point variant does not match base system: system expects {expected}, got {got}")]
    VariantMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("shift window too short: need {needed} symbols ahead, have {available}")]
    WindowTooShort { needed: usize, available: usize },

    #[error("measure incompatible with base system: {0}")]
    MeasureMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no uniform splitting at shift {shift}: {detail}")]
    NoUniformSplitting { shift: f64, detail: String },

    #[error("cocycle is not uniformly hyperbolic at shift {shift}: {reason}")]
    NotHyperbolic { shift: f64, reason: String },

    #[error("unstable-dimension profile is not strictly decreasing: {0}")]
    NonMonotoneProfile(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
