//! Spectral toolkit for the magnetic Dirichlet Laplacian `(i∇ + A)²` on curved
//! planar strips.
//!
//! The strip is straightened with tubular coordinates `(s, u)`, discretised
//! as a gauge-covariant Hermitian pencil `(K, M)` on a truncated grid, and the
//! lowest part of the spectrum is compared with the essential-spectrum
//! threshold `π²/d²`. The [`analysis`] module evaluates the explicit
//! constants and inequalities behind the absence of bound states.

pub mod analysis;
pub mod assembly;
pub mod eigen;
pub mod error;
pub mod geometry;
pub mod magnetic;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};
