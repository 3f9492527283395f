//! Bayesian Cox-Weibull reliability modeling for interval-censored
//! pass/fail recertification data.
//!
//! A fleet unit goes out on a cycle at age `t1`, comes back at age
//! `t2 = t1 + tslrt`, and is functionally tested: pass (0) or fail (1).
//! The failure is never observed directly, only bracketed by the interval,
//! so every likelihood in this crate is built from the conditional
//! Cox-Weibull survival
//!
//! ```text
//! p[T > t2 | T > t1, x] = exp((t1^c - t2^c) * lambda^c * e^score(x))
//! ```
//!
//! where `score(x)` is a log hazard ratio produced by a small feed-forward
//! network. Three Bayesian model variants are provided (MCMC-sampled Weibull
//! parameters, MC-dropout networks, and their combination) plus the
//! no-covariate conditional-Weibull baseline, together with the metric suite
//! used to compare them and a synthetic fleet generator that serves as the
//! ground-truth oracle for all of it.
//!
//! Built with `--no-default-features` the crate runs fully sequentially;
//! the default `parallel` feature fans the data-parallel inner loops
//! (posterior chains, BMA samples, Shapley permutations, fleet units)
//! out over rayon. Results are bit-identical either way: every parallel
//! task derives its own RNG seed from its index and reductions happen
//! in index order after collection.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod mcmc;
pub mod metrics;
pub mod model;
pub mod net;
pub mod seeding;
pub mod synthgen;
pub mod weibull;

mod exec;

pub use error::{Error, Result};
pub use weibull::WeibullParams;
