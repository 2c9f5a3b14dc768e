//! Bayesian repulsive nested biclustering for partially missing response
//! matrices.
//!
//! The model simultaneously clusters the rows (patients) of a response
//! matrix and, nested within each row cluster, its columns (tooth sites).
//! Cluster-specific regression coefficients carry repulsive
//! determinantal-point-process priors, a conditional autoregressive prior
//! captures spatial dependence among sites, and a shared-parameter latent
//! probit links the mean surface to non-ignorable tooth missingness.
//! Inference runs by reversible-jump MCMC with a WAIC scan over the row
//! cluster count and least-squares partition summaries.
//!
//! Entry points:
//! - [`sim::generate`] builds synthetic datasets with known truth,
//! - [`sampler::run_chain`] runs one chain and returns a posterior trace,
//! - [`sampler::waic_scan`] fits a range of cluster counts in parallel,
//! - [`summary`] turns traces into point estimates, intervals, co-clustering
//!   matrices, and posterior predictive category probabilities.
//!
//! The `examples/` directory walks through each capability end to end; the
//! thin `bicluster` binary wraps the same calls for shell use.

pub mod car;
pub mod cli;
pub mod data;
pub mod dpp;
pub mod error;
pub mod likelihood;
pub mod mat;
pub mod math;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod state;
pub mod summary;
pub mod trace;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
