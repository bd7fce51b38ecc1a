//! Vortex-blob vorticity fields and their Biot-Savart velocities.

mod blob;
mod initial;
mod mollifier;
mod p2p;
mod treecode;
mod velocity;

pub use blob::{
    discretize, discretize_on, discretize_with, equi_integrability_modulus, equi_integrability_modulus_on,
    eval_vorticity, l1_norm, sample_vorticity, EquiIntegrability, VortexBlobField,
};
pub use initial::{InitialVorticitySpec, Patch, PointVortex, SampleTable, LAMB_OSEEN_CUTOFF};
pub use mollifier::{MollifierProfile, MollifierSpec};
pub use treecode::TreecodeParams;
pub use velocity::{
    relative_l2_error, velocity_direct, velocity_treecode, TreecodeVelocities, VelocityEvaluator, VelocityMethod,
};
pub(crate) use p2p::{pair_kernel, PairColumns, PairKernel as PairKernelFn};
