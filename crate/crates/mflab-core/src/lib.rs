//! Numerical laboratory for mean-field jump processes on finite state spaces.
//!
//! Densities are taken with respect to a reference measure ν on `d` atoms.
//! Kernels are `d × d` rate matrices with zero diagonal, and adjoints are
//! ν-weighted transposes.

pub mod concentration;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod expm;
pub mod kernel;
pub mod meanfield;
pub mod par;
pub mod space;

pub use error::{Error, Result};
