//! Gray-box building thermal modeling.
//!
//! A lumped RC physics simulator is combined with data-driven learners
//! through four hybrid strategies (assistant, residual, surrogate,
//! augmentation). Models are explained with hierarchical Shapley (Owen)
//! values over a Pearson-distance feature clustering, and evaluated on a
//! seeded synthetic building.

pub mod error;
pub mod eval;
pub mod explain;
pub mod hybrid;
pub mod learners;
pub mod physics;
pub mod rng;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};
