//! Flocking dynamics toolkit.
//!
//! Simulates the Cucker-Smale interacting particle system together with its
//! random batch acceleration, a Monte Carlo realization of the batch
//! method's mean-field step, the clean-particle combinatorics behind the
//! batch/mean-field coupling, a polynomial-chaos variant for random
//! interaction kernels, and the measure metrics (Wasserstein, total
//! variation, temperature errors) used to validate all of the above.
//!
//! The crate is organized by subsystem:
//!
//! - [`kernels`]: communication weights and their validity checks
//! - [`integrators`]: fixed-step explicit time steppers
//! - [`particle`]: the N-body system, random batch stepping, diagnostics
//! - [`meanfield`]: sample-pool realization of the batch mean-field map
//! - [`cleanliness`]: influence lists and the unclean-probability estimator
//! - [`gpc`]: Legendre chaos basis, pair coefficient matrices, batched
//!   chaos stepping and density reconstruction
//! - [`kinetic`]: velocity-space reference solver for the homogeneous case
//! - [`metrics`]: distances between empirical measures
//! - [`harness`]: scenario configs, initial samplers, experiment drivers

pub mod cleanliness;
pub mod error;
pub mod gpc;
pub mod harness;
pub mod integrators;
pub mod kernels;
pub mod kinetic;
pub mod meanfield;
pub mod metrics;
pub mod particle;
pub mod rng;

pub use error::{Error, Result};
