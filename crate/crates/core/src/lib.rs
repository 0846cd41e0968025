//! Exact and Monte Carlo verification of causal identification results for
//! case-control designs.
//!
//! A discrete-time cohort law ([`model::DgpSpec`]) is enumerated exactly,
//! case-control sampling schemes are applied to it ([`sampling`]), and the
//! identification functionals ([`identify`]) are compared against the true
//! counterfactual estimands. [`estimate`] provides the finite-sample
//! analogues and a conditional logistic regression solver.

pub mod counterexample;
pub mod error;
pub mod estimate;
pub mod fixtures;
pub mod identify;
pub mod model;
pub mod sampling;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::{NumericMode, Scalar};
