use thiserror::Error;

/// Errors raised while building or solving a discretized problem.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature failed on cell {cell}: {reason}")]
    Quadrature { cell: usize, reason: String },

    #[error("assembly failed at entry ({row}, {col}): {reason}")]
    Assembly { row: usize, col: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("nonlinearity self-check failed: {0}")]
    DerivativeCheck(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
