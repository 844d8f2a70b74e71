use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("malformed CSR structure: {0}")]
    InvalidCsr(String),

    #[error("dimension mismatch in {op}: expected {expected}, got {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("zero diagonal entry at row {row}")]
    ZeroDiagonal { row: usize },

    #[error("non-positive diagonal entry {value} at row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },

    #[error("matrix is singular: no usable pivot in column {pivot_row}")]
    Singular { pivot_row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dof map inconsistency: {0}")]
    MapInconsistency(String),

    #[error("preconditioner is not positive definite at iteration {iteration} (r.z = {value:e})")]
    IndefinitePreconditioner { iteration: usize, value: f64 },

    #[error("CG breakdown at iteration {iteration}: p.Ap = {value:e}")]
    Breakdown { iteration: usize, value: f64 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
