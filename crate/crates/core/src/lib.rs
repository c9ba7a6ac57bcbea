//! Divergence estimation between group-invariant distributions.
//!
//! Given samples from two distributions that are invariant under a finite
//! group Σ, the estimators here restrict the test-function class to
//! Σ-invariant functions. For the Wasserstein-1 metric and MMD this is the
//! plain estimator applied to the orbit-symmetrized empirical measures; for
//! the Lipschitz-regularized α-divergence it is a concave program over the
//! symmetrized support.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`groups`] | cyclic rotations / translations, orbits, fundamental domains, assumption checks |
//! | [`measures`] | weighted empirical measures, symmetrization, pushforward to X0 |
//! | [`samplers`] | benchmark invariant distributions |
//! | [`w1`] | exact Wasserstein-1 (CDF formula, network simplex, quotient metric) |
//! | [`mmd`] | Gaussian-kernel MMD, symmetrized kernel, kernel constants |
//! | [`falpha`] | Lipschitz-regularized α-divergence |
//! | [`experiments`] | replicated sample-size sweeps, ratios, rate fits |

pub mod error;
pub mod experiments;
pub mod falpha;
pub mod groups;
pub mod io;
pub mod measures;
pub mod mmd;
pub mod rng;
pub mod samplers;
mod sum;
pub mod transport;
pub mod w1;

pub use error::{Error, Result};
pub use groups::GroupAction;
pub use measures::EmpiricalMeasure;
