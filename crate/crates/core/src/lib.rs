//! Wavelet-based shape perception for 2D electro-sensing.
//!
//! The crate simulates the multistatic response of a conductivity inclusion
//! with a Nyström discretization of the Neumann–Poincaré operator, represents
//! the bilinear form `T_D(f, g) = ∫_{∂D} g (λI − K*_D)^{-1}[∂f/∂ν] ds` in
//! polynomial and Daubechies scaling-function bases, reconstructs the wavelet
//! feature matrix from noisy data by masked weighted-ℓ1 minimization and turns
//! it into boundary images.
//!
//! Everything here is `no_std` + `alloc`. File formats, configuration and the
//! command line live in the `wavesense-cli` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bem;
pub mod features;
pub mod geometry;
pub mod imaging;
mod linalg;
pub mod recon;
pub mod sensing;
pub mod wavelet;

mod error;

pub use error::{Error, Result};
pub use geometry::Vec2;

pub use nalgebra;
