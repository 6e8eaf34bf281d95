use thiserror::Error;

use crate::basis::BasisFunctionIndex;
use crate::calibration::PathPoint;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} is out of range for the {basis} basis")]
    IndexOutOfRange {
        basis: &'static str,
        index: BasisFunctionIndex,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical integration did not converge (achieved error estimate {achieved:e})")]
    Integration { achieved: f64 },

    #[error("series diverges: requires {required}")]
    Divergence { required: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("slope-heuristic calibration inconclusive: {reason}")]
    CalibrationInconclusive {
        reason: String,
        path: Vec<PathPoint>,
    },

    #[error("out-of-model energy could not be certified (remainder {remainder:e})")]
    Truncation { remainder: f64 },

    #[error("malformed sample file: {0}")]
    SampleFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::IndexOutOfRange { .. }
            | Error::Domain(_)
            | Error::Integration { .. }
            | Error::Divergence { .. }
            | Error::Precondition(_)
            | Error::CalibrationInconclusive { .. }
            | Error::Truncation { .. } => 3,
            Error::SampleFormat(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
