use thiserror::Error;

use crate::conesolve::SolveStatus;

pub type Result<T> = std::result::Result<T, DromError>;

#[derive(Debug, Error)]
pub enum DromError {
    #[error("variable count mismatch: expected {expected}, found {found}")]
    VariableMismatch { expected: usize, found: usize },

    #[error("{what}: degree {degree} exceeds bound {bound}")]
    DegreeViolation {
        what: &'static str,
        degree: u32,
        bound: u32,
    },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("polynomial is not affine in the decision variables: {0}")]
    NotAffine(String),

    #[error("moment-set block rejected: {0}")]
    ConeY(String),

    #[error("conic solver ended with status {status:?}")]
    Solver { status: SolveStatus },

    #[error("atom extraction failed: {0}")]
    Extraction(String),

    #[error("optimizer recovery failed: {0}")]
    Recovery(String),

    #[error("problem file {path}: {message}")]
    Input { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
