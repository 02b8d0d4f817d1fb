//! Computations around cylindrical tangent cones `R^k x C^m_HL` to special
//! Lagrangian currents.

pub mod decay;
pub mod error;
pub mod excess;
pub mod geometry;
pub mod lattice;
pub mod harmonics;
pub mod poly;
pub mod quadrature;

pub use error::{Error, Result};
