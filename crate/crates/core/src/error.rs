use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric/Hermitian (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("input contains NaN or infinite entries")]
    NonFinite,

    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("data set is empty")]
    EmptyDataSet,

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("search space too large: {cells}^{points} assignments exceeds {limit}")]
    TooLarge {
        cells: usize,
        points: usize,
        limit: u64,
    },

    #[error("signal length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid shift structure: {0}")]
    StructureMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("ragged rows: row {row} has {found} values, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 for numeric failures, 2 for I/O and configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::FileNotFound(_)
            | Error::Parse { .. }
            | Error::RaggedRows { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::InvalidConfig(_)
            | Error::InvalidSpec(_)
            | Error::StructureMismatch(_)
            | Error::LengthMismatch { .. }
            | Error::EmptyDataSet
            | Error::TooLarge { .. } => 2,
            _ => 1,
        }
    }
}
