//! Numerical workbench for charged quasi-local Penrose inequalities.
//!
//! The crate builds rotationally symmetric (and axisymmetric, for surfaces
//! and extensions) geometry inside Reissner-Nordström reference slices,
//! constructs charged quasi-spherical extensions, smooths corners, and
//! evaluates the resulting mass inequalities with explicit tolerances.

pub mod corner;
pub mod error;
pub mod extension;
pub mod lab;
pub mod numerics;
pub mod par;
pub mod reference;
pub mod surface;

pub use error::{QlError, Result};
pub use reference::{FlowConstants, RNParams, RadialProfile};
pub use surface::{AxisymSurface, SurfaceGeometry};
pub use extension::Variant;
