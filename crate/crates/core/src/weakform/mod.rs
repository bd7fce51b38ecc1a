//! Test functions and residual evaluators for the weak formulations of
//! the Euler equations: symmetrized vorticity and velocity, renormalized
//! and the classical weak velocity form.

mod residual;
mod run;
mod test_function;

pub use residual::*;
pub use run::BlobRun;
pub use test_function::*;
