//! Non-overlapping additive Schwarz preconditioners with spectral coarse
//! spaces for high-contrast diffusion on the unit square.
//!
//! The pipeline is: [`mesh`] builds the grid and coefficient field,
//! [`partition`] numbers dofs, [`assembly`] forms the P1 matrices,
//! [`coarse`] and [`precond`] build the preconditioner, [`linalg::pcg`]
//! solves, and [`bench`] wires it into experiments.

pub mod assembly;
pub mod bench;
pub mod coarse;
pub mod error;
pub mod islands;
pub mod linalg;
pub mod mesh;
pub mod partition;
pub mod precond;

pub use error::{Error, Result};
