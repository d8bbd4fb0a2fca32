//! Numerical toolkit for the fractional Laplacian, its Poisson-kernel harmonic
//! extension, and the boundary growth criteria that decide whether a field
//! satisfies Hopf's lemma at a boundary point.
//!
//! Everything is pure, deterministic `f64` arithmetic: identical inputs
//! produce bit-identical outputs, and every quadrature returns an explicit
//! error bound and divergence flag instead of a bare number.

pub mod error;
pub mod fields;
pub mod nonlocal;
pub mod extension;
pub mod quad;
mod seq;
mod slope;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
