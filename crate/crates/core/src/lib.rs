//! Numerical toolkit for radial perturbations of the ground-state soliton of
//! the focusing energy-critical wave equation on ℝ³.
//!
//! Everything radial is stored in the half-line form `u = √(4π)·r·f` on a
//! [`grid::RadialGrid`]; the linearized operator `H = −Δ + V` then acts as
//! `−u'' + V u` with a Dirichlet condition at the origin.

pub mod dft;
pub mod error;
pub mod grid;
pub mod jost;
pub mod kernels;
pub mod modulation;
pub mod propagator;
pub mod quad;
pub mod randomize;
pub mod soliton;
pub mod spectrum;

pub use error::{Error, Result};
