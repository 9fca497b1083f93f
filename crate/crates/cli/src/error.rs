//! Process-level errors with their exit codes.
//!
//! Exit code map: 0 success (a cyclic diagnosis is a success), 2 parse or
//! usage, 3 snapshot dates not one year apart, 4 invariant violation in
//! the data, 5 missing prerequisite in an input artifact. Anything else
//! (output I/O, for instance) exits 1.

use curerate::absorption::AbsorptionError;
use curerate::chain::{EstimateError, MatrixReadError, MatrixSpecError};
use curerate::loan_tape::TapeError;
use curerate::simulate::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    DateMismatch(String),
    #[error("{0}")]
    Invariant(String),
    #[error("{0}")]
    MissingPrerequisite(String),
    #[error("{0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Parse(_) => 2,
            AppError::DateMismatch(_) => 3,
            AppError::Invariant(_) => 4,
            AppError::MissingPrerequisite(_) => 5,
            AppError::Io(_) => 1,
        }
    }
}

impl From<TapeError> for AppError {
    fn from(err: TapeError) -> Self {
        match err {
            TapeError::DateMismatch { .. } => AppError::DateMismatch(err.to_string()),
            other => AppError::Parse(other.to_string()),
        }
    }
}

impl From<MatrixReadError> for AppError {
    fn from(err: MatrixReadError) -> Self {
        match err {
            MatrixReadError::Invalid(inner) => AppError::Invariant(inner.to_string()),
            other => AppError::Parse(other.to_string()),
        }
    }
}

impl From<MatrixSpecError> for AppError {
    fn from(err: MatrixSpecError) -> Self {
        AppError::Invariant(err.to_string())
    }
}

impl From<EstimateError> for AppError {
    fn from(err: EstimateError) -> Self {
        match err {
            EstimateError::ZeroRow(_) => AppError::Invariant(err.to_string()),
            EstimateError::Matrix(inner) => AppError::Invariant(inner.to_string()),
            other => AppError::Parse(other.to_string()),
        }
    }
}

impl From<AbsorptionError> for AppError {
    fn from(err: AbsorptionError) -> Self {
        match err {
            AbsorptionError::SingularBlock(_) => AppError::Invariant(err.to_string()),
            other => AppError::Usage(other.to_string()),
        }
    }
}

impl From<SimError> for AppError {
    fn from(err: SimError) -> Self {
        AppError::Usage(err.to_string())
    }
}
