use thiserror::Error;

/// Errors raised by the geometry, oracle and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("tangent vector is attached to a different base point")]
    BaseMismatch,
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("retraction target is rank deficient (|R_jj| = {0:e})")]
    SingularRetraction(f64),
    #[error("point is not on the manifold (residual {0:e})")]
    Infeasible(f64),
    #[error("vector is not tangent at its base (residual {0:e})")]
    NotTangent(f64),
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("parameter `{name}` out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("oracle sample for the current iteration has not been drawn")]
    StaleSample,
    #[error("model gradient is zero and no negative curvature was detected")]
    ZeroGradient,
    #[error("eigen step requested with non-negative curvature estimate {0}")]
    NonNegativeCurvature(f64),
    #[error("missing curvature estimate required by the stopping rule")]
    MissingEigenEstimate,
    #[error("unknown solver variant `{0}`")]
    UnknownVariant(String),
    #[error("asymmetric input matrix {index} (residual {residual:e})")]
    Asymmetric { index: usize, residual: f64 },
    #[error("serialization: {0}")]
    Serialization(String),
    #[error("trace schema: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
