//! Numerical laboratory for the Yang-Mills-Higgs flow on flat periodic
//! domains of dimension n > 4.
//!
//! The crate discretizes the gradient flow of the Yang-Mills-Higgs energy
//! on an n-torus, provides exact finite-dimensional Lie-algebra kernels,
//! weighted heat-ball quadrature, and evaluators for the global and local
//! monotone quantities of the flow, so that each identity can be checked
//! numerically against its own statement.
//!
//! Modules:
//! - [`algebra`]: structure constants, Killing form, representations, exp.
//! - [`fields`]: lattice and analytic pairs (A, u) with gauge-covariant
//!   calculus, rescaling, radial gauge.
//! - [`flow`]: explicit RK4 time integration of the flow, self-similarity
//!   residuals, Higgs-equilibrium detection.
//! - [`heatball`]: kernels, heat-ball geometry and singular quadrature.
//! - [`monotone`]: global and local monotone quantities, cutoff constants,
//!   the static ball formula.
//! - [`cli`]: reproducible verification campaigns with CSV output.

pub mod algebra;
pub mod cli;
pub mod fields;
pub mod flow;
pub mod heatball;
pub mod io;
pub mod monotone;
pub mod util;
