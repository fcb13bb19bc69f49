use std::io;

use thiserror::Error;

pub type Result<T, E = SefdmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SefdmError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("matrix is numerically rank deficient at column {column} (pivot {pivot:.3e} below {threshold:.3e})")]
    DegenerateMatrix {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("iteration did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("exhaustive search over {n} subcarriers exceeds the cap of {cap}")]
    ComplexityGuard { n: usize, cap: usize },

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("model file format error in {field}: {reason}")]
    Format { field: String, reason: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl SefdmError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        SefdmError::Parameter(msg.into())
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        SefdmError::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn format(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SefdmError::Format {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Coarse failure class, used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            SefdmError::Parameter(_)
            | SefdmError::DimensionMismatch { .. }
            | SefdmError::ComplexityGuard { .. }
            | SefdmError::Range(_)
            | SefdmError::Usage(_) => ErrorKind::Parameter,
            SefdmError::DegenerateMatrix { .. }
            | SefdmError::Degenerate(_)
            | SefdmError::NoConvergence { .. }
            | SefdmError::Divergence { .. } => ErrorKind::Numerical,
            SefdmError::Format { .. } | SefdmError::Io(_) => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parameter,
    Numerical,
    Io,
}
