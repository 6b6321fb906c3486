//! Information-directed sampling for reinforcement learning from preference
//! feedback, on tabular finite-horizon MDPs.
//!
//! The crate is a small laboratory: a finite hypothesis set stands in for the
//! prior over environments, posteriors are exact, and mutual information is
//! either enumerated exactly or estimated by Monte Carlo. On top of that sit
//! the IDS and Approximate-IDS policy selection rules, a Thompson-sampling
//! baseline, and a harness that estimates Bayesian regret.
//!
//! Module map:
//! - [`env`]: tabular MDPs, policies, planning, occupancy and rollouts.
//! - [`cover`]: the log-ratio (`ℓ_g`) distance, greedy covers and value partitions.
//! - [`posterior`]: hypothesis sets, Bayes updates, mean and surrogate environments.
//! - [`information`]: mutual information (exact and Monte Carlo) and KL terms.
//! - [`agents`]: IDS, Approximate-IDS, Thompson sampling, uniform, lambda schedules.
//! - [`harness`]: preference oracle, episode loop, experiments, CLI.

pub mod agents;
pub mod checks;
pub mod cover;
pub mod env;
mod error;
pub mod harness;
pub mod information;
pub mod posterior;

pub use error::{Error, Result};

/// Tolerance used when validating that probability rows sum to one.
pub const ROW_SUM_TOL: f64 = 1e-12;
