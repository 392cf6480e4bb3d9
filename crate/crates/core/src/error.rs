use thiserror::Error;

use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{function}: argument {value} lies on the branch cut (-inf, 0]")]
    Domain { function: &'static str, value: C64 },

    #[error("{function}: eigenvalue {eigenvalue} of the projected matrix is within {distance:e} of the branch cut")]
    SpectrumOnCut {
        function: &'static str,
        eigenvalue: C64,
        distance: f64,
    },

    #[error("QR iteration failed to converge for eigenvalue index {index} after {sweeps} sweeps")]
    NoConvergence { index: usize, sweeps: usize },

    #[error("matrix is singular to working precision (pivot {index})")]
    Singular { index: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in input to {0}")]
    NonFinite(&'static str),

    #[error("Matrix Market parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Schur-Parlett evaluation failed: {0}")]
    Parlett(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
