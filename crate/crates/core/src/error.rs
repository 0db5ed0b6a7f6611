use thiserror::Error;

#[derive(Debug, Error)]
pub enum BiqError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("rank cap {rank} out of range 1..={dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not PSD: smallest eigenvalue {lambda_min:e} below -{tol:e}")]
    NotPsd { lambda_min: f64, tol: f64 },

    #[error("size {m}x{n} exceeds search limit {limit}")]
    SizeLimit { m: usize, n: usize, limit: usize },

    #[error("form is not certified SOS (status {0})")]
    NotCertified(String),

    #[error("graph contains a 4-cycle")]
    NotC4Free,

    #[error("decomposition does not reconstruct the form (residual {0:e})")]
    InvalidDecomposition(f64),

    #[error("form is not a simple biquadratic form: {0}")]
    NotSimpleForm(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("alternating projections did not converge for any rank in {r_min}..={r_max}")]
    RankSearchFailed { r_min: usize, r_max: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BiqError>;
