//! Error type shared by all library modules.

use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// The resolvent (zI - A) is ill-conditioned at the requested frequency,
    /// which signals a pole on or near the unit circle.
    #[error("near-singular resolvent at psi = {psi}")]
    NearSingularResolvent { psi: f64 },

    /// The eigenvalue iteration failed to converge.
    #[error("eigenvalue computation failed")]
    EigenFailure,

    /// The input to a Hermitian eigensolve is not Hermitian within tolerance.
    #[error("matrix is not Hermitian: asymmetry {asymmetry} exceeds tolerance {tolerance}")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    /// The long-window error energy is below the machine floor, so the
    /// F statistic is undefined; the caller should treat beta as 1.
    #[error("degenerate error variance in forgetting statistic")]
    DegenerateVariance,

    /// The p x p innovation solve in the covariance update is singular.
    #[error("innovation solve failed: covariance is corrupted")]
    InnovationSolveFailure,

    /// The regularized normal equations of the batch least-squares problem
    /// are singular, which the regularizer should preclude.
    #[error("singular normal equations in batch least squares")]
    SingularNormalEquations,

    /// R2 + B' P B is numerically singular in the Riccati recursion.
    #[error("inner solve singular in Riccati recursion")]
    InnerSolveSingular,

    /// The requested operation is not implemented for these dimensions.
    #[error("unsupported dimension in {context}: {detail}")]
    UnsupportedDimension {
        context: &'static str,
        detail: String,
    },

    /// The closed-loop dynamics matrix is singular, so the Tsypkin
    /// quantities that need its inverse are undefined.
    #[error("closed-loop dynamics matrix is singular")]
    SingularAtilde,

    /// A configuration value violates its documented constraints.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
