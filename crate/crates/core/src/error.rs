use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix that must be positive definite failed to factor.
    #[error("factorization failed at node {node}: {what} is not positive definite")]
    Factorization { node: usize, what: &'static str },

    #[error("singular linear system in {context}")]
    Singular { context: &'static str },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("KKT system dimension {dim} exceeds the dense-solver limit {limit}")]
    KktTooLarge { dim: usize, limit: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("empty input to {context}")]
    Empty { context: &'static str },

    #[error("pitch {pitch:.4} rad is outside the Euler-rate safe range")]
    PitchSingularity { pitch: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
