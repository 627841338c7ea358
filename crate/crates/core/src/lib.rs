//! Finite-element laboratory for a punctured-domain overdetermined problem,
//! shape functionals, weighted Poincaré constants and harmonic functions in
//! planar cones.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod assembly;
pub mod cone;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod optimize;
pub mod poincare;
pub mod pfunction;
pub mod quadrature;
pub mod report;
pub mod singular;

pub use error::{LabError, Result};
