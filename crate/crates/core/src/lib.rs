//! Loss-based ("Gibbs") posterior inference.
//!
//! A Gibbs posterior replaces the log-likelihood of ordinary Bayesian
//! inference with a scaled empirical risk:
//!
//! ```text
//! Πₙ(dθ) ∝ exp{−ω · n · Rₙ(θ)} Π(dθ)
//! ```
//!
//! The crate is split along the life of an inference run:
//!
//! - [`model`]: observations, datasets, parameter vectors and basis expansions.
//! - [`losses`]: loss functions, empirical risks and closed-form minimizers.
//! - [`priors`]: prior log-densities and exact prior sampling.
//! - [`rates`]: learning-rate schedules, including the data-driven AUC rate.
//! - [`sampler`]: the Gibbs target and Metropolis–Hastings samplers.
//! - [`diagnostics`]: excess-loss moments, the exponential-moment condition,
//!   divergences and concentration-rate fitting.
//! - [`harness`]: data-generating processes, the replication runner and
//!   result persistence.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod losses;
pub mod model;
pub mod priors;
pub mod rates;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{GibbsError, Result};
