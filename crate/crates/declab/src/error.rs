//! Error types shared across the laboratory.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A problem or training specification violates its invariants.
    #[error("invalid specification: {0}")]
    Spec(String),

    /// Shapes of matrices/vectors do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine failed (SVD breakdown, integrator underflow, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Training loss exceeded the divergence threshold.
    #[error("training diverged at step {step}: loss = {loss:.3e}")]
    Diverged { step: usize, loss: f64 },

    /// A fit or check has no well-defined answer on the given inputs.
    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }

    pub fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
