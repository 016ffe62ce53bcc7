//! Data-dependent generalization bounds for parameterized algorithms.
//!
//! The crate is organised bottom-up:
//!
//! - [`piecewise`]: piecewise-constant functions on a half-open interval.
//! - [`dpfit`]: optimal k-piece L∞ approximation by dynamic programming.
//! - [`rademacher`]: exact and Monte-Carlo empirical Rademacher complexity of
//!   a family given through its dual functions.
//! - [`bounds`]: closed-form generalization bounds (Massart, worst-case,
//!   structural risk minimization, baseline, Hoeffding slack).
//! - [`solver`]: a small branch-and-bound solver for binary programs with
//!   tunable score-based variable selection.
//! - [`configspace`]: instance generation, dual extraction over the mixing
//!   parameter, tree-size cap selection and approximation profiles.
//! - [`counterexample`]: numerical witness that L^p approximability does not
//!   imply low Rademacher complexity.

pub mod bounds;
pub mod configspace;
pub mod counterexample;
pub mod dpfit;
pub mod error;
pub mod piecewise;
pub mod rademacher;
pub mod solver;

pub use error::{Error, Result};
pub use piecewise::PiecewiseConstant;
