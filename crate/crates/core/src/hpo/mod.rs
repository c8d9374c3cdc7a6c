//! Bayesian optimisation of hyper-parameters with a Gaussian-process
//! surrogate and expected improvement.

mod acquisition;
mod bo;
mod gp;
mod space;

pub use acquisition::{expected_improvement, propose_next, DEFAULT_XI, N_CANDIDATES};
pub use bo::{bo_loop, latin_hypercube, random_search, BoOptions, BoResult, Trial};
pub use gp::{fallback_hyper, gp_fit, kernel, log_marginal_likelihood, GpHyper, GpModel};
pub use space::{Assignment, Dimension, NamedDimension, SearchSpace};
