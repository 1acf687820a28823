//! Numerical convex integration for radial weak solutions of the
//! forward-backward Perona-Malik equation under Neumann boundary conditions.
//!
//! The pipeline builds a classical seed from a uniformly parabolic
//! modification of the flux, then glues generations of sawtooth patches
//! onto it so that the gradient is driven towards the graph of the
//! original flux, while keeping the field within a prescribed sup-norm
//! distance of the seed.

pub mod auxiliary;
pub mod config;
pub mod covering;
pub mod density;
pub mod engine;
pub mod error;
pub mod export;
pub mod flux;
pub mod geometry;
pub mod parabolic;
pub mod numerics;

pub use error::{Error, Result};
