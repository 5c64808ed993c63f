use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched or invalid dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A value that must be finite/positive/etc. is not.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky failed even at the largest jitter level.
    #[error("matrix not positive definite (jitter up to {max_jitter:.0e} tried): {context}")]
    NotPositiveDefinite { context: String, max_jitter: f64 },

    /// Every particle weight underflowed to zero.
    #[error("all particle weights are zero at step {step}")]
    WeightCollapse { step: usize },

    /// Configuration rejected before any work was done.
    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
