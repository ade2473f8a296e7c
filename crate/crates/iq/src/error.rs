use thiserror::Error;

pub type Result<T> = std::result::Result<T, IqError>;

#[derive(Debug, Error)]
pub enum IqError {
    /// Rule order outside the supported range (root finding is validated up
    /// to alpha = 200).
    #[error("invalid rule order alpha={alpha}: must be in 1..=200")]
    InvalidOrder { alpha: usize },

    /// A tensor grid would exceed the point budget.
    #[error(
        "grid too large: alpha={alpha} dim={dim} gives {points} points (limit {limit}); \
         consider resampling thinning to a smaller node count"
    )]
    GridTooLarge {
        alpha: usize,
        dim: usize,
        points: u128,
        limit: u64,
    },

    /// Covariance factorization failed; `minor` is the order of the first
    /// non-positive-definite leading minor (1-based).
    #[error("covariance is not positive definite: leading minor of order {minor} is not positive")]
    NotPositiveDefinite { minor: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    /// Every combined weight vanished: the proposal places no node where the
    /// target has mass.
    #[error("degenerate weights: all importance weights are zero (proposal misses the target mass)")]
    DegenerateWeights,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}
