use thiserror::Error;

/// Errors raised while building or analysing complex-scaled operators.
#[derive(Debug, Error)]
pub enum CsmError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scaling angle {0} outside [0, pi/4)")]
    AngleDomain(f64),

    #[error("quadrature with {nodes} nodes is too small: {reason}")]
    InsufficientQuadrature { nodes: usize, reason: String },

    #[error("Gauss-Hermite root {index} of {order} did not converge")]
    QuadratureConvergence { order: usize, index: usize },

    #[error("two-particle dimension {dim} exceeds configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("no resonance found")]
    NoResonance,

    #[error("bilinear normalization defect {0:.3e} exceeds tolerance")]
    Normalization(f64),

    #[error("quadrature resolution error: trace defect {0:.3e}")]
    QuadratureResolution(f64),

    #[error("matrix dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CsmError> = std::result::Result<T, E>;
