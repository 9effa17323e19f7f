use thiserror::Error;

/// Errors raised by the channel, beamforming and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("zero-norm vector cannot define a combiner")]
    ZeroVector,

    #[error("probability 1 maps to an unbounded quantile")]
    UnboundedQuantile,

    #[error("quantile underflow: p-quantile {quantile:e} is not usable as a divisor")]
    QuantileUnderflow { quantile: f64 },

    #[error("moment-matched approximation requires kappa_h > 0 and kappa_g > 0; use the error-free fit instead")]
    ApproximationInvalid,

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error_estimate:e}")]
    QuadratureNonConvergence { estimate: f64, error_estimate: f64 },

    #[error("degenerate sample covariance: {0}")]
    DegenerateCovariance(&'static str),

    #[error("geometry has no active (sensing) elements")]
    NoActiveElements,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
