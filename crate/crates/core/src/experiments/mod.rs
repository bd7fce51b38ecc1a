//! Desk-scale reproductions of the constructive results: existence by
//! mollification, stability of flows and Lagrangian solutions under strong
//! and weak convergence of the data, the kernel translation law and the
//! fundamental estimate for flows.

mod existence;
mod level;
mod probe;
mod scaling;
mod slope;
mod stability;

pub use existence::{run_existence_pipeline, ConvergenceReport, ExistenceConfig, LevelSummary, StepRow, Trend};
pub use level::{
    check_equi_integrable, discretize_spaced, distances, Distances, LevelRun, MetricSetup, EQUI_DELTA, EQUI_LIMIT,
};
pub use probe::{
    compare, perturb_weight, run_fundamental_estimate_probe, run_probe_family, EnvelopeFit, FamilyRow,
    ProbeConfig, ProbeFamilyConfig, ProbeFamilyReport, ProbeReport, ProbeRow, ProbeSample, MIN_ENVELOPE_SLOPE, SATURATION,
};
pub use scaling::{
    run_kernel_scaling_experiment, SlopePoint, SlopeReport, SlopeRow, INCONCLUSIVE_FRACTION, SLOPE_ABOVE, SLOPE_BELOW,
};
pub use slope::least_squares_slope;
pub use stability::{
    run_stability_experiment, OscillationCheck, Perturbation, StabilityConfig, StabilityReport, StabilityRow,
    OSCILLATION_FLOOR,
};
