//! Tailored finite point solver for the discrete-ordinate radiative transfer
//! equation in x-y geometry, with adaptive angular compression.

pub mod angular;
pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod linsolve;
pub mod local_basis;
pub mod mesh;
pub mod pipeline;
pub mod problems;
pub mod reduction;
pub mod slab1d;
pub mod solution;

pub use error::{Error, Result};
