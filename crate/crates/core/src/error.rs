use thiserror::Error;

/// Errors raised across the sieve toolkit.
#[derive(Debug, Error)]
pub enum SieveError {
    /// A basis, density or study configuration violates one of its constraints.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("point {point:?} lies outside the unit cube [0,1]^{dim}")]
    Domain { point: Vec<f64>, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("theoretical Gram not invertible (smallest eigenvalue {min_eigenvalue:e})")]
    SingularGram { min_eigenvalue: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("matrix violates the band condition: entry ({row}, {col}) = {value:e} with half-band {half_band}")]
    BandViolation {
        row: usize,
        col: usize,
        value: f64,
        half_band: usize,
    },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SieveError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(SieveError::Config(msg.into()))
}
