//! Spectral Galerkin solver for the stochastic incompressible Navier–Stokes
//! equations on a moving planar domain D(t).
//!
//! The domain is carried onto the unit square by a level-preserving map,
//! the velocity is expanded in a time-dependent orthonormal basis of
//! divergence-free fields, and the coefficient SDE is integrated by
//! Euler–Maruyama.

pub mod error;
pub mod assembly;
pub mod basis;
pub mod geometry;
pub mod quadrature;
pub mod diagnostics;
pub mod solver;

pub use error::{Error, Result};
