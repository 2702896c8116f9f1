use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cholesky factorization of the innovation covariance failed.
    #[error("innovation covariance is not positive definite: {s}")]
    SingularInnovation { s: DMatrix<f64> },

    #[error("covariance is not positive definite")]
    SingularCovariance,

    /// Every particle assigned zero likelihood to a measurement.
    #[error("all particles degenerate at measurement {step}")]
    DegenerateFilter { step: usize },

    #[error("scenario generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
