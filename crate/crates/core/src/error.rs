use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix dimension {requested} exceeds the configured maximum {max}")]
    DimensionOverflow { requested: usize, max: usize },
    #[error("partial trace over a 2-dimensional factor needs an even dimension, got {0}")]
    OddDimension(usize),
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("pole of {kernel} at {detail}")]
    Pole { kernel: &'static str, detail: String },
    #[error("invalid boundary parameters: {0}")]
    InvalidBoundary(String),
    #[error("inhomogeneities are not generic: {0}")]
    NotGeneric(String),
    #[error("invalid root set: {0}")]
    InvalidRoots(String),
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
