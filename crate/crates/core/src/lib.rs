//! Vortex-blob construction of Lagrangian solutions of the 2D incompressible
//! Euler equations with integrable vorticity, together with the functionals
//! used to verify them: weak-form residuals, weak Lebesgue seminorms,
//! local convergence in measure and flow stability estimates.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`]: the Biot-Savart kernel and the symmetrization kernels.
//! * [`field`]: vortex-blob fields, initial data and velocity evaluation
//!   (direct summation and a multipole treecode).
//! * [`flow`]: forward/backward flow maps, pushforward of vorticity and
//!   flow-distance metrics.
//! * [`weakform`]: test functions and residuals of the weak formulations.
//! * [`diagnostics`]: M² seminorm, convergence in measure, pairings.
//! * [`experiments`]: the existence, stability, kernel-scaling and
//!   fundamental-estimate pipelines.
//! * [`io`]: versioned CSV layouts for fields, flow maps and reports.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod flow;
pub mod grid;
pub mod io;
pub mod kernel;
mod quadrature;
mod sum;
pub mod vec2;
pub mod weakform;

pub use error::{Error, Result};
pub use vec2::Vec2;
