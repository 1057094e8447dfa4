use thiserror::Error;

use crate::solver::OptimalState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: pivot modulus {pivot:e} at step {step}")]
    SingularMatrix { step: usize, pivot: f64 },

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("gapless point: dispersion phase undefined at theta = {theta}")]
    GaplessPoint { theta: f64 },

    #[error("correlation matrix is not block-Toeplitz (deviation {deviation:e})")]
    NotBlockToeplitz { deviation: f64 },

    #[error("fixed-point iteration did not converge after {} iterations (residual {:e})", .0.iterations_used, .0.final_residual)]
    NotConverged(Box<OptimalState>),

    #[error("renormalization applies only to the bosonic eta = 0 sector")]
    WrongSector,

    #[error("invalid reduced state: {0}")]
    InvalidState(String),

    #[error("{sites} sites exceed the dense limit of {limit}")]
    TooLarge { sites: usize, limit: usize },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("ill-conditioned fit: design condition number {condition:e}")]
    IllConditionedFit { condition: f64 },

    #[error("quantity diverges at the critical point")]
    Critical,

    #[error("invalid {field}: {message}")]
    InvalidParameter { field: &'static str, message: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            message: message.into(),
        }
    }
}
