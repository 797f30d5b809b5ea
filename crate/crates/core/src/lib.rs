//! Polytopal discretisation of linear elasticity with Tresca frictional
//! contact on planar fracture networks.

pub mod error;
pub mod geometry;
pub mod dofs;
pub mod mesh;
pub mod assembly;
pub mod contact;
pub mod reconstruction;
pub mod sparse;
pub mod verification;
pub mod harness;

pub use error::{Error, Result};
