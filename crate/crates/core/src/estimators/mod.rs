//! Maximum likelihood and equivariant integrated squared error (EISE)
//! estimation of `(μ, σ, α)`, with the Fisher information and the EISE
//! asymptotic matrices.

pub mod eise;
pub mod fisher;
pub mod mle;
pub mod profile;
pub mod weight;

pub use eise::{eise_fit, eise_fit_fixed_alpha, eise_matrices, EiseMatrices, EiseObjective};
pub use fisher::{cauchy_al, fisher_info, fisher_location_scale, FisherInfo, FisherInverse};
pub use mle::{log_likelihood, mle_fit, mle_fit_fixed_alpha};
pub use profile::{FitOptions, FitReport};
pub use weight::{WeightKind, WeightSpec};
