use thiserror::Error;

use crate::stable::StableParams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature on [{a}, {b}] failed: estimate {estimate:e} with error {error:e} ({detail})")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
        detail: String,
    },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("optimizer did not converge after {iterations} iterations (best {best:?}, gradient norm {gradient_norm:e})")]
    NonConvergence {
        best: StableParams,
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("series inversion failed: {0}")]
    Inversion(String),

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing table: {0}")]
    MissingTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
