//! Numerical laboratory for the quantum Brownian motion master equation.
//!
//! The crate evolves the Wigner-function master equation on a phase-space
//! grid, represents its constant-coefficient Lie point symmetries and their
//! bracket algebra, reduces the equation to one dimension along a symmetry
//! invariant, maps the reduced equation onto the free Schrödinger equation,
//! and solves the Ermakov-Pinney equation that governs the reduced
//! equation's symmetries. Each identity is exposed as a residual or oracle
//! check.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod ermakov;
pub mod error;
pub mod fields;
mod interp;
pub mod master_solver;
pub mod ode;
pub mod reduction;
pub mod symmetry;
pub mod time_fn;

pub use error::{QbmError, Result};
