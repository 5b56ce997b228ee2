use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Numerical-domain violation (bad schedule endpoints, non-positive sigma, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The step-size fraction eta left the admissible band, so beta would be imaginary.
    #[error(
        "eta = {eta} violates the admissible band 1-gamma <= eta <= 1+gamma \
         (gamma = {gamma}, band [{lo}, {hi}]); beta would be imaginary"
    )]
    EtaOutOfBounds { eta: f64, gamma: f64, lo: f64, hi: f64 },

    #[error("index {index} out of bounds (valid range 1..={max})")]
    IndexOutOfBounds { index: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// Operation requires an affine score (score = A(sigma)x + b(sigma)).
    #[error("unsupported operation: {0} requires an affine score oracle")]
    NonAffine(String),

    /// Operation requires an exact oracle (true score of a known density).
    #[error("unsupported operation: {0} requires an exact score oracle")]
    NotExact(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
