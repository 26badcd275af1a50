use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("no mode satisfies the energy cutoff")]
    EmptyBasis,
    #[error("eigendecomposition failed: {0}")]
    EigFailure(String),
    #[error("point {0} lies outside the grid domain")]
    OutOfDomain(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires a torus basis")]
    UnsupportedBasis,
    #[error("divergent quantity: {0}")]
    Divergent(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("no sign change found for bisection in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("Fock dimension {dim} exceeds budget {budget}")]
    TooLarge { dim: u128, budget: usize },
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("coherent-state tail {tail:e} beyond n_max exceeds 1e-10")]
    CutoffTooSmall { tail: f64 },
}
