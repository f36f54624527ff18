//! Conflict graph design for randomized experiments under network interference.
//!
//! The pipeline: build an interference [`graph::Graph`], pick an
//! [`estimand::Estimand`], derive its conflict graph, order units by
//! importance, sample a [`design::DesignDraw`], and estimate with
//! [`estimator`]. [`oracle`] enumerates the design exactly for small
//! instances; [`sim`] runs replicate sweeps.

pub mod design;
pub mod error;
pub mod estimand;
pub mod estimator;
pub mod graph;
pub mod oracle;
pub mod ordering;
pub mod sim;

pub use error::{Error, Result};
