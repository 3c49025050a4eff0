use thiserror::Error;

/// Errors produced by the core algorithms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain parameters: {0}")]
    InvalidChain(String),

    #[error("rank {rank} out of range 1..={max} for local dimension {local_dim}")]
    RankOutOfRange { rank: usize, local_dim: usize, max: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("term has no excited space (multiple of the identity)")]
    NoExcitedSpace,

    #[error("product-state construction requires rank < local dimension (rank {rank}, local dimension {local_dim})")]
    NotProductSoluble { rank: usize, local_dim: usize },

    #[error("dense size {size} exceeds cap {cap}")]
    CapExceeded { size: u128, cap: usize },

    #[error("terminal index {index} out of range for {count} solutions")]
    TerminalIndex { index: usize, count: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("container format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
