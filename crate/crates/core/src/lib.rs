//! Spectral laboratory for two-dimensional periodic Schrödinger operators
//! `H = -Δ + V`: plane-wave Bloch fibers, the integrated density of states,
//! and the resonance/non-resonance decomposition of the dual space that
//! controls its high-energy asymptotics.

pub mod bloch;
pub mod error;
pub mod ids;
pub mod lattice;
pub mod perturb;
pub mod linalg;
pub mod nonres;
pub mod potential;
pub mod resonance;
pub mod zones;

pub use error::{Error, Result};
