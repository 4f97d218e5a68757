use thiserror::Error;

/// Errors produced by the fitting library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("vector must have unit norm, got norm {norm}")]
    NonUnitVector { norm: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid bounds: lower must be strictly below upper at coordinate {index}")]
    InvalidBounds { index: usize },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("residuals are not finite at the initial point")]
    NonFiniteResiduals,
    #[error("trust region collapsed while residuals stayed non-finite")]
    TrustRegionCollapse,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all {0} subspace candidates failed to fit")]
    AllCandidatesFailed(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
