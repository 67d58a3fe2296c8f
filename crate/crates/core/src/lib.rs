//! Goodness-of-fit tests for symmetric stable laws based on the weighted L²
//! distance between the empirical characteristic function of standardized
//! data and the fitted stable characteristic function.
//!
//! The crate covers the whole pipeline: stable densities and score
//! functions ([`stable`]), maximum likelihood and equivariant integrated
//! squared error fitting ([`estimators`]), the test statistic ([`ecf`]),
//! asymptotic covariance kernels ([`kernels`]), Nyström eigenvalues and the
//! Fredholm determinant ([`spectral`]), Slepian inversion of the limiting
//! distribution ([`inversion`]) and finite-sample experiments
//! ([`montecarlo`]).

pub mod cli;
pub mod ecf;
pub mod error;
pub mod estimators;
pub mod interp;
pub mod inversion;
pub mod kernels;
pub mod montecarlo;
pub mod optim;
pub mod quadrature;
pub mod spectral;
pub mod stable;

pub use error::{Error, Result};
pub use stable::StableParams;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;
