//! Galerkin finite-element solver for the two-dimensional power-law
//! Navier–Stokes–Fourier system, together with a suite of diagnostics that
//! measure the structural properties of its solutions: the kinetic energy
//! balance, the temperature minimum principle, the entropy equality, uniform
//! weighted temperature estimates, continuity of the temperature in time and
//! exponential decay towards a steady state.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] : constitutive closures (stress, heat flux) and scalar helpers.
//! * [`domain`] : mesh, Taylor–Hood / P1 spaces, quadrature and assembly.
//! * [`steady`] : the temperature lift and stationary states.
//! * [`stepper`] : backward-Euler time stepping with Picard linearisation.
//! * [`diagnostics`] : structural checks over computed trajectories.
//! * [`expr`] : a small expression language for field data.

pub mod diagnostics;
pub mod domain;
mod error;
pub mod expr;
pub mod model;
pub mod problem;
pub mod steady;
pub mod stepper;

pub use error::{Error, Result};
