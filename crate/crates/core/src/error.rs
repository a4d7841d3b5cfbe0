use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("token {token} outside alphabet of size {alphabet}")]
    TokenOutOfAlphabet { token: usize, alphabet: usize },

    #[error("{what} exceeds limit {limit}")]
    SizeExceeded { what: String, limit: u64 },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("MDP assumption violated: {0}")]
    Assumption(String),

    #[error("no convergence after {iterations} sweeps (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("design matrix is rank deficient: {0}")]
    Singular(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
