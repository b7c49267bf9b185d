//! Joint planning of wind farm sites and day-ahead dispatch under a
//! decision-dependent Wasserstein ambiguity set.
//!
//! The main entry points are [`decomp::solve`] for a [`decomp::Problem`],
//! the sample generators in [`sampling`] and the experiments in
//! [`evaluate`]. Runnable walkthroughs live in `examples/`.

pub mod ambiguity;
pub mod cli;
pub mod decomp;
pub mod error;
pub mod evaluate;
pub mod fixtures;
pub mod instance;
pub mod linalg;
pub mod model;
pub mod recourse;
pub mod sampling;
pub mod solution;

pub use error::{Error, Result};
