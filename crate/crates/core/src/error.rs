use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("degenerate monitor: total integral is {0}")]
    DegenerateMonitor(f64),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("derivative order {0} is not supported")]
    UnsupportedDerivative(usize),

    #[error("Gauss rule with {0} points is not supported (1..=8)")]
    UnsupportedQuadrature(usize),

    #[error("point {x} lies outside the domain [-{half_length}, {half_length}]")]
    OutsideDomain { x: f64, half_length: f64 },

    #[error("operation requires a different basis: {0}")]
    UnsupportedBasis(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonFailure {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("degenerate correction term: <grad, z> = {0:e}")]
    DegenerateCorrection(f64),

    #[error("degenerate peak: {0}")]
    DegeneratePeak(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::Dimension { expected, actual });
    }
    Ok(())
}
