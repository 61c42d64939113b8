//! Random walks on supercritical percolation clusters: configuration sampling,
//! cluster extraction, local densities, exact potential theory on finite windows,
//! multi-scale parameter schedules, and Monte Carlo experiments on porous interfaces.

pub mod bitset;
pub mod cluster_graph;
pub mod density;
pub mod error;
pub mod lattice;
pub mod percolation;
pub mod potential;
pub mod resonance;
pub mod rng;
pub mod schedule;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};
