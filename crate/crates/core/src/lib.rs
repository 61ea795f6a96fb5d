//! Numerical verification toolkit for the fractional p-Laplacian
//!
//! ```text
//! (-Δ)_p^s u(x) = C · PV ∫ |u(x) - u(y)|^{p-2} (u(x) - u(y)) / |x - y|^{n+ps} dy
//! ```
//!
//! The crate evaluates the operator by principal-value quadrature
//! ([`kernel`]), computes the half-space eigen-constants ([`closed_forms`]),
//! verifies barrier and supersolution inequalities ([`barrier`]), solves
//! one-dimensional Dirichlet problems and fits boundary Hölder exponents
//! ([`solver`]), and reproduces the moving-plane δ-scaling estimates behind the
//! boundary Hopf lemma ([`hopf`]). The [`cli`] module drives all of these from
//! the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod cli;
pub mod closed_forms;
mod error;
pub mod hopf;
pub mod kernel;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
pub use kernel::{EvalResult, FracParams, QuadratureSpec, ScalarField, TailModel};
