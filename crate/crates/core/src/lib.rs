//! Numerical (n-k)-dimensional Radon transforms and their duals on affine
//! Grassmannians.
//!
//! The library discretizes the Haar measure on G_{n-k,n}, evaluates the
//! forward transform Rf(H, z) = int_H f(y + z) dy and its dual
//! R*g(x) = int g(H, P_{H-perp} x) dnu(H), and builds on those the
//! comparison, slicing and mapping-property experiments exposed through the
//! `experiments` module and the companion CLI.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod geometry;
pub mod quadrature;
pub mod transforms;

pub use error::{Error, Result};
