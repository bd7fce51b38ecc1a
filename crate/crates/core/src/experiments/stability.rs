use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::existence::Trend;
use super::level::{check_equi_integrable, discretize_spaced, distances, LevelRun, MetricSetup};
use crate::field::{l1_norm, InitialVorticitySpec, VortexBlobField};
use crate::flow::FlowConfig;
use crate::io::write_table;
use crate::{Error, Result};

/// How the family of initial data approaches its limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    /// ε_k = coarsest_eps / 2^k, carriers spaced `spacing_ratio`·ε_k. The
    /// limit is represented by one extra level at half the finest scale.
    StrongL1 { coarsest_eps: f64, spacing_ratio: f64 },
    /// The base profile times a checkerboard of cell side 1/n_k, with
    /// n_k = coarsest_frequency · 2^k, on a fixed carrier lattice. The weak
    /// limit of the data is 0, whose solution is the fluid at rest.
    WeakOscillatory { coarsest_frequency: f64, eps: f64, spacing: f64 },
}

impl Perturbation {
    pub fn strong() -> Self {
        Self::StrongL1 {
            coarsest_eps: 0.08,
            spacing_ratio: 1.0,
        }
    }

    pub fn weak() -> Self {
        Self::WeakOscillatory {
            coarsest_frequency: 8.0,
            eps: 1.0 / 64.0,
            spacing: 1.0 / 64.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::StrongL1 { .. } => "strong_l1",
            Self::WeakOscillatory { .. } => "weak_oscillatory",
        }
    }

    /// The level parameter: ε in strong mode, n in weak mode.
    pub fn parameter(&self, level: usize) -> f64 {
        let scale = 2f64.powi(level as i32);
        match *self {
            Self::StrongL1 { coarsest_eps, .. } => coarsest_eps / scale,
            Self::WeakOscillatory { coarsest_frequency, .. } => coarsest_frequency * scale,
        }
    }

    fn validate(&self) -> Result<()> {
        let vals: &[(&'static str, f64)] = match self {
            Self::StrongL1 {
                coarsest_eps,
                spacing_ratio,
            } => &[("coarsest_eps", *coarsest_eps), ("spacing_ratio", *spacing_ratio)],
            Self::WeakOscillatory {
                coarsest_frequency,
                eps,
                spacing,
            } => &[
                ("coarsest_frequency", *coarsest_frequency),
                ("eps", *eps),
                ("spacing", *spacing),
            ],
        };
        for &(name, v) in vals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn initial(&self, base: &InitialVorticitySpec, level: usize) -> Result<VortexBlobField> {
        match *self {
            Self::StrongL1 { spacing_ratio, .. } => {
                let eps = self.parameter(level);
                discretize_spaced(base, eps, spacing_ratio * eps)
            }
            Self::WeakOscillatory { eps, spacing, .. } => {
                let spec = InitialVorticitySpec::oscillating(base.clone(), self.parameter(level));
                discretize_spaced(&spec, eps, spacing)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub base: InitialVorticitySpec,
    pub perturbation: Perturbation,
    pub n_levels: usize,
    pub t_end: f64,
    pub flow: FlowConfig,
    #[serde(default)]
    pub setup: MetricSetup,
}

/// One level. Distances are to the limit run and are absent when the
/// report holds a single level; `vorticity_step` is the ω L¹ distance to
/// the previous level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub level: usize,
    pub parameter: f64,
    pub blobs: usize,
    pub l1_norm: f64,
    pub circulation_drift: f64,
    pub equi_modulus: f64,
    pub flow: Option<f64>,
    pub vorticity: Option<f64>,
    pub velocity: Option<f64>,
    pub pairing: Option<f64>,
    pub vorticity_step: Option<f64>,
}

/// Weak-mode witness that the data do not converge strongly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationCheck {
    pub min_step: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Fraction of ‖ω⁰‖_{L¹} that consecutive weak-mode levels must stay apart.
pub const OSCILLATION_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mode: String,
    pub rows: Vec<StabilityRow>,
    pub trends: Vec<Trend>,
    pub oscillation: Option<OscillationCheck>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.trends.iter().all(|t| t.passed) && self.oscillation.is_none_or(|o| o.passed)
    }

    pub fn max_circulation_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.circulation_drift).fold(0.0, f64::max)
    }

    pub fn write_levels(&self, out: impl Write) -> Result<()> {
        write_table(out, "stability_levels", &[("mode", self.mode.clone())], &self.rows)
    }
}

pub fn run_stability_experiment(cfg: &StabilityConfig) -> Result<StabilityReport> {
    if cfg.n_levels == 0 {
        return Err(Error::param("n_levels", "must be at least 1"));
    }
    cfg.perturbation.validate()?;
    cfg.setup.validate()?;
    cfg.flow.validate()?;
    let fields = (0..cfg.n_levels)
        .map(|k| cfg.perturbation.initial(&cfg.base, k))
        .collect::<Result<Vec<_>>>()?;
    let compare = cfg.n_levels > 1;
    let reference_field = match cfg.perturbation {
        Perturbation::StrongL1 { .. } if compare => Some(cfg.perturbation.initial(&cfg.base, cfg.n_levels)?),
        _ => None,
    };
    let mut family: Vec<&VortexBlobField> = fields.iter().collect();
    family.extend(reference_field.as_ref());
    let moduli = check_equi_integrable(&family)?;

    let runs = fields
        .into_par_iter()
        .map(|f| LevelRun::solve(f, cfg.t_end, &cfg.flow, &cfg.setup))
        .collect::<Result<Vec<_>>>()?;
    let reference = match (reference_field, compare) {
        (Some(f), _) => Some(LevelRun::solve(f, cfg.t_end, &cfg.flow, &cfg.setup)?),
        (None, true) => Some(LevelRun::at_rest(&cfg.setup, cfg.t_end)?),
        (None, false) => None,
    };

    let mut rows = Vec::with_capacity(runs.len());
    for (k, run) in runs.iter().enumerate() {
        let to_limit = reference.as_ref().map(|r| distances(run, r, &cfg.setup)).transpose()?;
        let step = if k > 0 {
            Some(distances(&runs[k - 1], run, &cfg.setup)?.vorticity)
        } else {
            None
        };
        rows.push(StabilityRow {
            level: k,
            parameter: cfg.perturbation.parameter(k),
            blobs: run.field0.len(),
            l1_norm: l1_norm(&run.field0),
            circulation_drift: run.circulation_drift(),
            equi_modulus: moduli[k],
            flow: to_limit.map(|d| d.flow),
            vorticity: to_limit.map(|d| d.vorticity),
            velocity: to_limit.map(|d| d.velocity),
            pairing: to_limit.map(|d| d.pairing),
            vorticity_step: step,
        });
    }

    let mut trends = Vec::new();
    let mut oscillation = None;
    if compare {
        let column = |f: fn(&StabilityRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<_>>();
        trends.push(Trend::strictly_decreasing("flow", column(|r| r.flow)));
        trends.push(Trend::strictly_decreasing("velocity", column(|r| r.velocity)));
        trends.push(Trend::decreasing("pairing", column(|r| r.pairing)));
        match cfg.perturbation {
            Perturbation::StrongL1 { .. } => {
                trends.push(Trend::strictly_decreasing("vorticity", column(|r| r.vorticity)));
            }
            Perturbation::WeakOscillatory { .. } => {
                let min_step = column(|r| r.vorticity_step).into_iter().fold(f64::INFINITY, f64::min);
                let threshold = OSCILLATION_FLOOR * rows[0].l1_norm;
                oscillation = Some(OscillationCheck {
                    min_step,
                    threshold,
                    passed: min_step > threshold,
                });
            }
        }
    }
    Ok(StabilityReport {
        mode: cfg.perturbation.name().into(),
        rows,
        trends,
        oscillation,
    })
}
