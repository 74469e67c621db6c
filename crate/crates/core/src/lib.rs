//! Fluctuation-induced power, force and torque on a dipolar particle
//! above a gyrotropic half-space.

// NaN must fail validation, so checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dispersion;
pub mod dynamics;
pub mod error;
pub mod fresnel;
pub mod greens;
pub mod materials;
mod numeric;
pub mod quadrature;
pub mod spectra;

pub use error::{Error, Result};
