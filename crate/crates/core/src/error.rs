use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("eigen-solve failed: {0}")]
    EigenSolve(String),

    #[error("capillary pressure is singular at effective saturation {0}")]
    CapillarySingularity(f64),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual_norm:.3e})")]
    NonConvergence { iterations: usize, residual_norm: f64 },

    #[error("non-finite residual at cell {cell}")]
    NonFiniteResidual { cell: usize },

    #[error("time step underflow at t = {time_years:.6e} yr: {source}")]
    TimeStepUnderflow {
        time_years: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("design matrix is numerically rank deficient (min/max |R_ii| = {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("all screening sensitivities are zero")]
    AllZeroSensitivity,

    #[error("no parameter has a screening index above tol = {tol}")]
    EmptyReduction { tol: f64 },

    #[error("ensemble has zero variance")]
    DegenerateEnsemble,

    #[error("zero total variance")]
    ZeroVariance,

    #[error("correlation undefined: variance {variance:.3e} at abscissa index {index}")]
    Undefined { index: usize, variance: f64 },

    #[error("surrogates do not share a basis and reduced index set")]
    BasisMismatch,

    #[error("basis too large: {terms} terms")]
    BasisTooLarge { terms: u128 },

    #[error("sparse regression did not converge after {iterations} iterations")]
    RegressionNonConvergence { iterations: usize },

    #[error("empty cross-validation grid")]
    EmptyGrid,

    #[error("zero denominator in relative error")]
    ZeroDenominator,

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{failed} of {total} forward solves failed, above the allowed fraction {allowed}")]
    SolverFailureBudget { failed: usize, total: usize, allowed: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
