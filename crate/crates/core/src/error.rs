use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        what: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(String),
    #[error("(A, C) is not detectable")]
    NotDetectable,
    #[error("(A, Q) is not stabilizable")]
    NotStabilizable,
    #[error("system is not stable (spectral radius {spectral_radius})")]
    UnstableSystem { spectral_radius: f64 },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("iteration did not converge within {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error("measurement required when the packet arrives")]
    MissingMeasurement,
    #[error("inconsistent arguments: {0}")]
    InconsistentArgs(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("design problem infeasible: {0}")]
    Infeasible(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the CLI: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::NotPositiveDefinite(_)
            | Error::NotDetectable
            | Error::NotStabilizable
            | Error::InconsistentArgs(_)
            | Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::MissingMeasurement => 2,
            Error::UnstableSystem { .. }
            | Error::SingularInnovation
            | Error::NoConvergence { .. }
            | Error::Infeasible(_)
            | Error::CalibrationFailed(_) => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
