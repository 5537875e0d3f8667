use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the decomposition and forecasting stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: non-numeric value {value:?}")]
    NonNumericValue { line: usize, value: String },
    #[error("line {line}: non-finite value {value}")]
    NonFiniteValue { line: usize, value: f64 },
    #[error("line {line}: timestamp gap or disorder (expected {expected}, found {found})")]
    TimestampGap {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("series is empty")]
    EmptySeries,
    #[error("series has zero range (constant values)")]
    ZeroRange,
    #[error("series too short: need at least {required} samples, got {actual}")]
    TooShort { required: usize, actual: usize },
    #[error("input is monotone: no interior extrema")]
    Monotone,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("zero actual value at index {index}: MAPE denominator is zero")]
    ZeroDenominator { index: usize },
    #[error("SMO did not converge after {iterations} iterations (KKT gap {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64 },
    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error comes from bad input data rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedRow { .. }
                | Error::NonNumericValue { .. }
                | Error::NonFiniteValue { .. }
                | Error::TimestampGap { .. }
                | Error::EmptySeries
                | Error::ZeroRange
                | Error::TooShort { .. }
                | Error::Monotone
                | Error::LengthMismatch { .. }
                | Error::ZeroDenominator { .. }
                | Error::Csv(_)
        )
    }
}
