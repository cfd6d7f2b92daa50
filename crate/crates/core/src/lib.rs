//! Equivariant vector Allen–Cahn minimizers on balls under finite reflection
//! groups, computed by gradient flow, with numerical checks of the estimates
//! that drive their exponential decay.

pub mod comparison;
pub mod coxeter;
pub mod error;
pub mod field;
pub mod flow;
pub mod mat;
pub mod potential;
pub mod verify;

pub use error::{Error, Result};
