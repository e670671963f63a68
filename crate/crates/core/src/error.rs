use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("subsystem index {index} out of range for {count} subsystems")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("Kraus operators are not trace preserving (max deviation {deviation:.3e})")]
    Completeness { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
