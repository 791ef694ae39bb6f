//! Noisy one-bit broadcasting through bounded-degree DAGs and 2D grids.

pub mod bounds;
pub mod coupling;
pub mod divergence;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod percolation;
pub mod rng;
pub mod sigma;
pub mod stats;
pub mod xorcode;

pub use error::{Error, Result};
