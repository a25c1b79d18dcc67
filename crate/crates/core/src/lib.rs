//! Floor plan structural-element parsing: synthetic data, junction detection,
//! candidate line graphs, an attention GNN with its own autodiff, training and
//! evaluation.

pub mod binfmt;
pub mod embed;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod graph;
pub mod junction;
pub mod nn;
pub mod pipeline;
pub mod synthgen;
pub mod train;

pub use error::{Error, Result};
