//! Pseudo-spectral solver for the damped Navier-Stokes-Voigt equations on a
//! periodic box, with adjoint-based, box-constrained optimal control of the
//! enstrophy-tracking cost.
//!
//! The forward scheme is first-order IMEX Euler. The tangent, adjoint and
//! second-order adjoint solvers are the exact derivatives and transposes of
//! the discrete forward map, so gradients and Hessian-vector products agree
//! with finite differences of the discrete cost to roundoff.

pub mod cli;
pub mod control;
pub mod error;
pub mod fields;
pub mod operators;
pub mod params;
pub mod sensitivity;
pub mod state;
pub mod vec3;
pub mod verification;

pub use error::{Error, Result};
