use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a type invariant or an operation precondition.
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },

    #[error("dimension mismatch in {file} ({field}): expected {expected}, found {found}")]
    DimensionMismatch {
        file: PathBuf,
        field: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {file} at element {index}")]
    NonFinite { file: PathBuf, index: usize },

    #[error("unsupported format version {found} in {file} (expected {expected})")]
    Version {
        file: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("malformed {file}: {reason}")]
    Format { file: PathBuf, reason: String },

    #[error("calibration trace magnitude {magnitude:e} below guard {guard:e} at {frequency_hz} Hz")]
    CalibrationNull {
        frequency_hz: f64,
        magnitude: f64,
        guard: f64,
    },

    #[error("{edge} band edge {value_hz} Hz is not on the frequency grid")]
    OffGrid { edge: &'static str, value_hz: f64 },

    /// Zero total power after gating; the link is in outage for this quantity.
    #[error("zero total power: {0}")]
    Outage(String),

    #[error("{0}")]
    Unrealizable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by numerical degeneracy rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Outage(_) | Error::Unrealizable(_) | Error::CalibrationNull { .. }
        )
    }
}
