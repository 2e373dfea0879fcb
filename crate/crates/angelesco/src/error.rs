use thiserror::Error;

/// Unified error type for the whole library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Adaptive quadrature exhausted its subdivision budget before reaching
    /// the requested tolerance. Carries the best error estimate reached.
    #[error("quadrature did not converge: estimate {achieved:e} above tolerance {requested:e} after {evaluations} evaluations")]
    NonConvergence {
        achieved: f64,
        requested: f64,
        evaluations: u64,
    },

    /// The integrand returned a non-finite value at a quadrature node.
    #[error("integrand is singular or overflows at {location}")]
    SingularEndpoint { location: String },

    /// A matrix-function evaluation was requested on a jump ray, where only
    /// one-sided boundary values exist.
    #[error("point lies on a jump ray (arg z = {arg_z}); request a boundary value instead")]
    OnContour { arg_z: f64 },

    /// Derivatives of the kernel building block vanishing like x^{β+2} do not
    /// extend to x = 0.
    #[error("derivative of order {order} undefined at 0")]
    UndefinedDerivativeAtZero { order: u8 },

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Off-diagonal kernel evaluation requested on the diagonal x = y.
    #[error("kernel methods require x != y; use the finite-n kernel for diagonal values")]
    CoincidentPoints,

    /// The double-integral denominator xs - yt came too close to zero on the
    /// chosen contour pair; the contours need rescaling.
    #[error("near-singular denominator: min |xs - yt| = {min_abs:e} below safety bound {required:e}")]
    NearSingularDenominator { min_abs: f64, required: f64 },

    /// Linear-solve pivots indicate the working precision no longer carries
    /// enough significant bits.
    #[error("precision insufficient: pivot ratio leaves ~{significant_bits} significant bits (need >= {required})")]
    PrecisionInsufficient {
        significant_bits: i64,
        required: i64,
    },

    /// Constructor-level validation failure (precision too low, tolerance
    /// below representable resolution, malformed weight data, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
