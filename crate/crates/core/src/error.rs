//! Error type shared by every module in the crate.

use thiserror::Error;

/// Failures surfaced by the simulation and optimization routines.
///
/// Degenerate configurations are reported rather than papered over: a
/// microstrip whose elements are all switched off produces a zero-variance
/// ADC input, and downstream statistics are undefined for it.
#[derive(Debug, Error)]
pub enum DmaError {
    /// A dimension or configuration parameter is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Two operands disagree on their dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A microstrip output has zero (or negative, after rounding) variance,
    /// which happens when every element on it is effectively switched off.
    #[error("microstrip {index} has non-positive output variance {variance}")]
    SwitchedOffMicrostrip { index: usize, variance: f64 },

    /// A normalized correlation left [-1, 1] by more than the clamping
    /// tolerance; the input was not a valid covariance matrix.
    #[error("normalized correlation {value} at ({row}, {col}) is outside [-1, 1]")]
    CorrelationOutOfRange { row: usize, col: usize, value: f64 },

    /// A Hermitian system that must be positive definite failed to factor.
    #[error("system matrix is singular or not positive definite")]
    SingularSystem,

    /// A quantity that must be a valid SINDR (finite and non-negative) is not.
    #[error("invalid SINDR value {value} for user {user}")]
    InvalidSindr { user: usize, value: f64 },

    /// A nonzero combiner column met an exactly zero SINDR denominator, which
    /// requires a degenerate effective channel and zero distortion.
    #[error("SINDR denominator for user {user} is zero")]
    ZeroSindrDenominator { user: usize },

    /// A vector that must be unit-modulus entrywise is not.
    #[error("entry {index} has modulus {modulus}, expected 1 within {tolerance}")]
    NotUnitModulus {
        index: usize,
        modulus: f64,
        tolerance: f64,
    },

    /// Writing simulation output failed.
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}
