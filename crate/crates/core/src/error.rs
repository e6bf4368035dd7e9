use thiserror::Error;

#[derive(Debug, Error)]
pub enum CfsError {
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("signature violated: {positive} positive, {negative} negative, {zero} zero eigenvalues for spin dimension {spin_dim}")]
    Signature { positive: usize, negative: usize, zero: usize, spin_dim: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not differentiable: {0}")]
    NonDifferentiable(String),

    #[error("field not tangent: {0}")]
    NotTangent(String),

    #[error("regime violation: {0}")]
    RegimeViolation(String),

    #[error("incomparable under regime: {0}")]
    Incomparable(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CfsError>;
