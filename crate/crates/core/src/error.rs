use alloc::string::String;

/// Errors raised by the estimation, integration and diagnostic routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter outside the model domain")]
    OutsideDomain,

    #[error("Newton solver did not converge: {0}")]
    NonConvergence(String),

    #[error("Hessian is not numerically positive definite")]
    SingularHessian,

    #[error("finite-difference stencil left the parameter domain")]
    DomainEscape,

    #[error("normalizing integral diverges for alpha={alpha}")]
    DivergentIntegral { alpha: f64 },

    #[error("no approximation method is available: {0}")]
    ApproximationUnavailable(String),

    #[error("latent expectation is not integrable: {0}")]
    NonIntegrableLatent(String),

    #[error("result is not finite: {0}")]
    NonFiniteResult(String),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("quadrature grid too coarse: normalization off by {deviation:e}")]
    GridTooCoarse { deviation: f64 },

    #[error("operation not supported by model `{0}`")]
    UnsupportedModel(String),
}

pub type Result<T> = core::result::Result<T, Error>;
