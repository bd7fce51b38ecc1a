use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::level::{check_equi_integrable, discretize_spaced, distances, Distances, LevelRun, MetricSetup};
use crate::field::{l1_norm, InitialVorticitySpec};
use crate::flow::FlowConfig;
use crate::io::write_table;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExistenceConfig {
    pub initial: InitialVorticitySpec,
    /// Blob scales, coarsest first.
    pub eps_levels: Vec<f64>,
    pub t_end: f64,
    pub flow: FlowConfig,
    #[serde(default)]
    pub setup: MetricSetup,
    /// Carrier spacing as a multiple of ε.
    #[serde(default = "one")]
    pub spacing_ratio: f64,
}

fn one() -> f64 {
    1.0
}

/// Per-level facts that do not involve a second run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub eps: f64,
    pub blobs: usize,
    pub l1_norm: f64,
    pub circulation: f64,
    pub circulation_drift: f64,
    pub equi_modulus: f64,
}

impl LevelSummary {
    pub(crate) fn of(eps: f64, run: &LevelRun, equi_modulus: f64) -> Self {
        Self {
            eps,
            blobs: run.field0.len(),
            l1_norm: l1_norm(&run.field0),
            circulation: run.circulation[0],
            circulation_drift: run.circulation_drift(),
            equi_modulus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub eps_coarse: f64,
    pub eps_fine: f64,
    pub flow: f64,
    pub vorticity: f64,
    pub velocity: f64,
    pub pairing: f64,
}

/// Outcome of a monotonicity check on one distance sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub metric: String,
    pub values: Vec<f64>,
    /// Indices k where values[k+1] ≥ values[k] before the final comparison.
    pub coarse_violations: Vec<usize>,
    pub passed: bool,
}

impl Trend {
    /// A sequence passes when its last comparison strictly decreases; two
    /// exact zeros also pass. Earlier increases only warn.
    pub fn decreasing(metric: &str, values: Vec<f64>) -> Self {
        let down = |a: f64, b: f64| b < a || (a == 0.0 && b == 0.0);
        let n = values.len();
        let mut coarse_violations = Vec::new();
        for k in 0..n.saturating_sub(2) {
            if !down(values[k], values[k + 1]) {
                coarse_violations.push(k);
            }
        }
        let passed = n < 2 || down(values[n - 2], values[n - 1]);
        Self {
            metric: metric.into(),
            values,
            coarse_violations,
            passed,
        }
    }

    /// Every comparison must decrease.
    pub fn strictly_decreasing(metric: &str, values: Vec<f64>) -> Self {
        let mut t = Self::decreasing(metric, values);
        t.passed &= t.coarse_violations.is_empty();
        t
    }

    pub fn warnings(&self) -> Vec<String> {
        self.coarse_violations
            .iter()
            .map(|&k| {
                format!(
                    "{}: step {} does not decrease ({:.3e} -> {:.3e})",
                    self.metric,
                    k,
                    self.values[k],
                    self.values[k + 1]
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelSummary>,
    pub steps: Vec<StepRow>,
    pub trends: Vec<Trend>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.trends.iter().all(|t| t.passed)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.trends.iter().flat_map(Trend::warnings).collect()
    }

    pub fn max_circulation_drift(&self) -> f64 {
        self.levels.iter().map(|l| l.circulation_drift).fold(0.0, f64::max)
    }

    pub fn write_levels(&self, out: impl Write) -> Result<()> {
        write_table(out, "existence_levels", &[], &self.levels)
    }

    pub fn write_steps(&self, out: impl Write) -> Result<()> {
        write_table(out, "existence_steps", &[], &self.steps)
    }
}

/// Mollify, solve and compare consecutive levels.
pub fn run_existence_pipeline(cfg: &ExistenceConfig) -> Result<ConvergenceReport> {
    if cfg.eps_levels.len() < 3 {
        return Err(Error::param("eps_levels", "need at least three levels"));
    }
    if cfg.eps_levels.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::param("eps_levels", "must be non-increasing"));
    }
    if !(cfg.spacing_ratio > 0.0) {
        return Err(Error::param("spacing_ratio", "must be positive"));
    }
    cfg.setup.validate()?;
    cfg.flow.validate()?;
    let fields = cfg
        .eps_levels
        .iter()
        .map(|&eps| discretize_spaced(&cfg.initial, eps, cfg.spacing_ratio * eps))
        .collect::<Result<Vec<_>>>()?;
    let moduli = check_equi_integrable(&fields.iter().collect::<Vec<_>>())?;
    let runs = fields
        .into_par_iter()
        .map(|f| LevelRun::solve(f, cfg.t_end, &cfg.flow, &cfg.setup))
        .collect::<Result<Vec<_>>>()?;
    let levels = cfg
        .eps_levels
        .iter()
        .zip(&runs)
        .zip(&moduli)
        .map(|((&eps, run), &m)| LevelSummary::of(eps, run, m))
        .collect();
    let mut steps = Vec::new();
    for k in 0..runs.len() - 1 {
        let d = distances(&runs[k], &runs[k + 1], &cfg.setup)?;
        steps.push(step_row(cfg.eps_levels[k], cfg.eps_levels[k + 1], d));
    }
    let column = |f: fn(&StepRow) -> f64| steps.iter().map(f).collect::<Vec<_>>();
    let trends = vec![
        Trend::decreasing("flow", column(|s| s.flow)),
        Trend::decreasing("vorticity", column(|s| s.vorticity)),
        Trend::decreasing("velocity", column(|s| s.velocity)),
    ];
    Ok(ConvergenceReport { levels, steps, trends })
}

fn step_row(eps_coarse: f64, eps_fine: f64, d: Distances) -> StepRow {
    StepRow {
        eps_coarse,
        eps_fine,
        flow: d.flow,
        vorticity: d.vorticity,
        velocity: d.velocity,
        pairing: d.pairing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_rules() {
        assert!(Trend::decreasing("x", vec![3.0, 2.0, 1.0]).passed);
        let t = Trend::decreasing("x", vec![1.0, 2.0, 1.0]);
        assert!(t.passed);
        assert_eq!(t.warnings().len(), 1);
        assert!(!Trend::decreasing("x", vec![3.0, 1.0, 2.0]).passed);
        assert!(Trend::decreasing("x", vec![0.0, 0.0]).passed);
        assert!(!Trend::strictly_decreasing("x", vec![1.0, 2.0, 1.0]).passed);
        assert!(Trend::decreasing("x", vec![]).passed);
    }
}
