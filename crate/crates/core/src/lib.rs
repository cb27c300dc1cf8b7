//! Numerical potential theory for Brownian motion and (relativistic)
//! symmetric α-stable processes on ℝ^d.

// `!(x > 0.0)` also rejects NaN; kept deliberately.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forms;
pub mod geometry;
pub mod kernels;
mod linalg;
pub mod potentials;
pub mod profile;
pub mod quad;
pub mod report;
pub mod selftest;
pub mod special;
pub mod stochastic;

pub use error::{Error, Result};
pub use profile::{DecayProfile, DecisionRule, Limit, Verdict};
