//! Numerical workbench for the stability of the ODE blowup family of the
//! focusing semilinear wave equation `psi_tt - lap psi = psi |psi|^{p-1}`.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: parameters, the boosted blowup family and the power nonlinearity.
//! * [`poly`]: exact polynomial calculus on balls and spheres.
//! * [`energy`]: higher energy inner products and dissipativity certificates.
//! * [`hypergeom`]: Gauss hypergeometric functions and the radial elliptic solver.
//! * [`spectral`]: collocation of the linearized operator, spectra and projections.
//! * [`evolution`]: nonlinear evolution in similarity variables and parameter fitting.

// Negated comparisons are how NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod dd;
pub mod energy;
mod error;
pub mod evolution;
pub mod hypergeom;
pub mod model;
pub mod poly;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
