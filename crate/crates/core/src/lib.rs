//! Pseudo-spectral laboratory for energy decay of 2D Navier-Stokes
//! perturbations around a radial vortex.

pub mod analysis;
pub mod decomposition;
pub mod error;
mod fft;
pub mod harness;
pub mod heat;
pub mod solver;
pub mod spectral;
pub mod stats;
pub mod vortex;

pub use error::{Error, Result};
