//! Regularized crawler models with symmetry reduction, equilibrium
//! certification and relative limit cycles.

// negated comparisons are how NaN inputs fail range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycles;
pub mod dual;
pub mod equilibrium;
pub mod error;
pub mod integrate;
pub mod model;
pub mod reduction;
pub mod smoothing;

pub use error::{CrawlError, Result};
