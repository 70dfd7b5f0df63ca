//! Sotomayor–Teixeira regularization of planar Filippov systems near a visible fold.
//!
//! The crate builds the regularized field `Z_eps`, integrates it through the
//! stiff strip `|y| <= eps`, and measures the return maps and scaling laws
//! of orbits that slide up to a fold and leave it.

pub mod acceptance;
pub mod bifurcation;
pub mod error;
pub mod fields;
pub mod inner_equation;
pub mod models;
pub mod integrator;
pub mod poincare;
pub mod regularization;
pub mod slow_manifold;

pub use error::{Error, Result};
