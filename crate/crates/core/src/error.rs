use thiserror::Error;

/// Errors raised by the field, kernel and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("dimension mismatch: expected {expected} components, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("band {j} outside resolvable range [{min}, {max}]")]
    BandOutOfRange { j: i32, min: i32, max: i32 },
    #[error("tensor field is not symmetric (max |F_kl - F_lk| = {0:e})")]
    Asymmetric(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("smallness violated: {0}")]
    SmallnessViolated(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
