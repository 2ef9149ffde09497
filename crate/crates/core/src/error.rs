use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("group {0} has no subjects in the snapshot")]
    EmptyGroup(u8),

    #[error("snapshot must contain subjects from both groups")]
    SingleGroup,

    #[error("no second-stage information: variance increment {0:e} is not positive")]
    NoSecondStageInformation(f64),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("no spline estimable: {0}")]
    NotEstimable(String),

    #[error("spline fit failed: {0}")]
    FitFailure(String),

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("p1 = {p1} is outside the continuation region ({alpha1}, {alpha0}]")]
    NotInContinuation { p1: f64, alpha1: f64, alpha0: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
