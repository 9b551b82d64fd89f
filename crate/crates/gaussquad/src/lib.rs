//! Randomized truncated trapezoidal quadrature for integrals against the
//! standard Gaussian measure.
//!
//! The target quantity is `I(f) = ∫ f(x) ρ(x) dx` with `ρ` the standard
//! normal density. The estimator draws a random node count and a random grid
//! shift for an equispaced rule on a cut-off window `[-T, T]`, and adds one
//! truncated-normal node per tail so the whole rule is an unbiased estimator
//! of `I(f)`. Replicating the rule gives both a mean estimate and an unbiased
//! sample-variance estimate of its mean-squared error.
//!
//! Modules:
//! - [`special`]: Gaussian density, CDF, quantile and tail mass with tight
//!   accuracy contracts.
//! - [`rng`]: seedable, splittable random streams (uniform integers, open
//!   uniforms, truncated-normal tails).
//! - [`rules`]: the deterministic baseline rule, cut-off strategies, and the
//!   randomized rule (draw + evaluate).
//! - [`estimator`]: replicated estimation and the sample-variance MSE
//!   estimator, plus a nested Monte Carlo calibration check.
//! - [`test_functions`]: benchmark integrands with reference integrals, and
//!   compactly supported polynomial bumps used by lower-bound property tests.
//! - [`oracle`]: independent ground truth — an adaptive Gauss–Kronrod
//!   integrator and an exhaustive-expectation evaluator for unbiasedness
//!   checks.
//! - [`experiment`]: convergence studies over `n = 2^k`, CSV emission,
//!   log-log slope fits and SVG plots.

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod oracle;
pub mod rng;
pub mod rules;
pub mod special;
pub mod test_functions;

pub use error::{Error, Result};
