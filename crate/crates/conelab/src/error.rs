use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown cone `{0}`")]
    UnknownCone(String),
    #[error("invalid cone specification: {0}")]
    InvalidSpec(String),
    #[error("matrix is not positive definite (pivot {pivot} at block {block})")]
    NotPositiveDefinite { block: usize, pivot: f64 },
    #[error("point lies on the boundary (smallest eigenvalue ratio {0:e})")]
    BoundaryPoint(f64),
    #[error("factor leaves the block pattern (residual {0:e})")]
    NotInCone(f64),
    #[error("matrix leaves the realization subspace (residual {0:e})")]
    SubspaceViolation(f64),
    #[error("leading complex block is numerically singular")]
    SingularMinor,
    #[error("weight vector out of range: {0}")]
    WeightOutOfRange(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("divergence detected: {0}")]
    DivergenceDetected(String),
    #[error("no lattice candidate admitted in region")]
    RegionTooSmall,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("bound violated: {0}")]
    BoundViolated(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
