//! Continuum contour dynamics: smooth 2D ideal-fluid vortices evolved in
//! polar contour-field variables, with invariant monitors and independent
//! analytic and spectral oracles.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::needless_range_loop
)]

pub mod dynamics;
pub mod error;
pub mod fastmath;
pub mod geometry;
pub mod interp;
pub mod invariants;
pub mod kernels;
pub mod oracles;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{GriddedVorticity, PatchContour, Point, PolarContourField, VortexRegion, VortexSystem};
