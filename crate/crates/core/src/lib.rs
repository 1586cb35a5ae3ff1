//! Numerical core for multiscale battery-pack heat transfer.
//!
//! Fine-scale (cell/packing resolving), homogenized, and hybrid solvers on
//! P1 triangle meshes. No IO and no `std`; everything here is deterministic
//! computation over in-memory data.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod closure;
pub mod error;
pub mod fem;
pub mod fine;
pub mod geometry;
pub mod hybrid;
pub mod mesh;
pub mod post;
pub mod special;
pub mod upscaled;

pub use error::{Error, Result};

/// 2D point / vector.
pub type Point = [f64; 2];
