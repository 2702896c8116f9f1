//! Multi-target tracking with an unknown number of targets.
//!
//! Target states are linear-Gaussian and marginalized with Kalman filters, so
//! only the measurement-to-target associations are sampled. On top of the
//! association particle filter sit two particle MCMC samplers (marginal
//! Metropolis-Hastings and particle Gibbs) that infer the static model
//! parameters jointly with the association histories.
//!
//! Module map:
//!
//! - [`gauss`]: Kalman predict/update, Gaussian densities, call counting.
//! - [`model`]: the 2-D Ornstein-Uhlenbeck target model and its birth density.
//! - [`association`]: association priors, clutter density, the death rule.
//! - [`filter`]: the association particle filter and its conditional variant.
//! - [`pmcmc`]: PMMH and particle Gibbs samplers over the model parameters.
//! - [`diagnostics`]: OSPA, PSRF, Kolmogorov distance, ESS, convergence curves.
//! - [`simulate`]: scenario generator and scenario CSV format.

pub mod association;
pub mod diagnostics;
mod error;
pub mod filter;
pub mod gauss;
pub mod model;
pub mod pmcmc;
pub mod simulate;

pub use error::{Error, Result};
