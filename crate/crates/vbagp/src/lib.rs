//! Failure-probability estimation with actively learned Gaussian-process
//! surrogates, plus a variance decomposition of the estimator into its
//! sampling and surrogate contributions.
//!
//! The crate provides:
//!
//! - a universal-kriging Gaussian-process surrogate ([`gp`]);
//! - conditioned-trajectory simulation, directly or through a
//!   Karhunen-Loève expansion of the unconditioned process ([`trajectories`]);
//! - weighted sample populations and failure-probability estimators for
//!   Monte Carlo and importance sampling ([`population`]);
//! - the U/EFF learning functions and an AK-MCS baseline loop ([`learning`]);
//! - estimators of the sampling variance, the surrogate variance, the total
//!   variance and the associated confidence intervals ([`variance`]);
//! - non-parametric adaptive importance sampling ([`nais`]);
//! - the variance-based active-learning orchestrator in Monte Carlo and
//!   importance-sampling modes ([`algorithm`]);
//! - benchmark problems and a replicated experiment harness ([`bench`]).
//!
//! See the `examples/` directory for a runnable tour of each capability, and
//! the `vbagp` binary for the experiment command line.

pub mod algorithm;
pub mod bench;
pub mod error;
pub mod gp;
pub mod learning;
pub mod math;
pub mod nais;
pub mod population;
pub mod problem;
pub mod stream;
pub mod trajectories;
pub mod variance;

pub use error::{Error, Result};
pub use stream::RandomStream;
