use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::least_squares_slope;
use super::level::MetricSetup;
use crate::field::VortexBlobField;
use crate::flow::{integrate_flow, measure_distance_on, Cohort, FlowConfig, FlowMap};
use crate::grid::Grid;
use crate::io::write_table;
use crate::sum::pairwise;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Flow-distance levels γ.
    pub gammas: Vec<f64>,
    /// Radius r of the ball on which flows are compared.
    pub radius: f64,
    /// Offset η subtracted from the distance before forming the ratio.
    pub eta: f64,
    /// Radii λ of the velocity balls, as multiples of r.
    pub lambda_factors: Vec<f64>,
    pub label_spacing: f64,
    /// Spacing of the velocity quadrature grid.
    pub velocity_spacing: f64,
    pub checkpoints: usize,
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}

fn default_checkpoints() -> usize {
    5
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            gammas: vec![1e-4, 1e-3],
            radius: 3.0,
            eta: 0.0,
            lambda_factors: default_lambdas(),
            label_spacing: 0.02,
            velocity_spacing: 0.1,
            checkpoints: default_checkpoints(),
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.gammas.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::param("gammas", "need at least one positive γ"));
        }
        if self.lambda_factors.is_empty() || self.lambda_factors.iter().any(|&l| !(l >= 1.0)) {
            return Err(Error::param("lambda_factors", "need factors of at least 1"));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::param("eta", "must be non-negative"));
        }
        self.setup(self.gammas[0]).validate()
    }

    fn setup(&self, gamma: f64) -> MetricSetup {
        MetricSetup {
            radius: self.radius,
            label_spacing: self.label_spacing,
            vorticity_spacing: self.velocity_spacing,
            checkpoints: self.checkpoints,
            gamma,
        }
    }

    fn lambda_max(&self) -> f64 {
        self.radius * self.lambda_factors.iter().copied().fold(1.0, f64::max)
    }
}

/// What the probe needs from one run.
#[derive(Debug, Clone)]
pub struct ProbeSample {
    times: Vec<f64>,
    lattice: Vec<Vec<Vec<Vec2>>>,
    snapshot_times: Vec<f64>,
    /// Velocity on the quadrature points, per snapshot.
    velocity: Vec<Vec<Vec2>>,
}

impl ProbeSample {
    pub fn new(flow: &FlowMap, cfg: &ProbeConfig) -> Result<Self> {
        cfg.validate()?;
        let setup = cfg.setup(cfg.gammas[0]);
        let labels = setup.labels()?;
        let times = setup.times(flow.t_end());
        let cohorts: Vec<Cohort> = times
            .iter()
            .map(|&t| Cohort {
                start: t,
                points: labels.points().to_vec(),
                stops: times.clone(),
            })
            .collect();
        let lattice = flow.sweep(&cohorts)?;
        let (points, _) = quadrature_points(cfg)?;
        let snapshot_times = flow.times().to_vec();
        let velocity = snapshot_times
            .iter()
            .map(|&t| flow.history().velocity_at(t, &points))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times,
            lattice,
            snapshot_times,
            velocity,
        })
    }
}

fn quadrature_points(cfg: &ProbeConfig) -> Result<(Vec<Vec2>, f64)> {
    let lam = cfg.lambda_max();
    let g = Grid::covering_ball(Vec2::ZERO, lam, cfg.velocity_spacing)?;
    Ok((g.points_in_ball(Vec2::ZERO, lam), g.cell_area()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub gamma: f64,
    pub lambda: f64,
    /// max over the (s, t) lattice of the flow measure distance.
    pub distance: f64,
    /// ‖v_A − v_B‖_{L¹((0,T)×B_λ)}.
    pub velocity_l1: f64,
    /// (distance − η) / velocity_l1; absent when the velocities agree.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    /// Both runs agree: every ratio is 0/0.
    pub fn degenerate(&self) -> bool {
        self.rows.iter().all(|r| r.ratio.is_none())
    }

    pub fn write(&self, out: impl Write) -> Result<()> {
        write_table(out, "probe", &[], &self.rows)
    }
}

/// Compares two runs over the same time range.
pub fn run_fundamental_estimate_probe(a: &FlowMap, b: &FlowMap, cfg: &ProbeConfig) -> Result<ProbeReport> {
    compare(&ProbeSample::new(a, cfg)?, &ProbeSample::new(b, cfg)?, cfg)
}

pub fn compare(a: &ProbeSample, b: &ProbeSample, cfg: &ProbeConfig) -> Result<ProbeReport> {
    if a.times != b.times || a.snapshot_times != b.snapshot_times {
        return Err(Error::GridMismatch("runs cover different time ranges or snapshots".into()));
    }
    let labels = cfg.setup(cfg.gammas[0]).labels()?;
    let (points, area) = quadrature_points(cfg)?;
    let mut rows = Vec::new();
    for &gamma in &cfg.gammas {
        let mut distance: f64 = 0.0;
        for (ra, rb) in a.lattice.iter().zip(&b.lattice) {
            for (xa, xb) in ra.iter().zip(rb) {
                distance = distance.max(measure_distance_on(&labels, xa, xb, gamma, cfg.radius)?);
            }
        }
        for &f in &cfg.lambda_factors {
            let lambda = f * cfg.radius;
            let per_time: Vec<f64> = a
                .velocity
                .iter()
                .zip(&b.velocity)
                .map(|(va, vb)| {
                    let d: Vec<f64> = points
                        .iter()
                        .zip(va.iter().zip(vb))
                        .filter(|(x, _)| x.norm() < lambda)
                        .map(|(_, (u, w))| (*u - *w).norm())
                        .collect();
                    pairwise(&d) * area
                })
                .collect();
            let velocity_l1 = trapezoid(&a.snapshot_times, &per_time);
            let ratio = (velocity_l1 > 0.0).then(|| (distance - cfg.eta) / velocity_l1);
            rows.push(ProbeRow {
                gamma,
                lambda,
                distance,
                velocity_l1,
                ratio,
            });
        }
    }
    Ok(ProbeReport { rows })
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    let terms: Vec<f64> = t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).collect();
    pairwise(&terms)
}

/// Copy of `field` with δ added to the weight of the blob nearest `target`.
pub fn perturb_weight(field: &VortexBlobField, target: Vec2, delta: f64) -> Result<VortexBlobField> {
    let k = field
        .positions()
        .iter()
        .enumerate()
        .min_by(|(_, p), (_, q)| p.dist(target).total_cmp(&q.dist(target)))
        .map(|(k, _)| k)
        .ok_or_else(|| Error::param("field", "has no blobs to perturb"))?;
    let mut w = field.weights().to_vec();
    w[k] += delta;
    field.with_weights(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFamilyConfig {
    pub deltas: Vec<f64>,
    pub target: Vec2,
    pub t_end: f64,
    pub flow: FlowConfig,
    pub probe: ProbeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub delta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub distance: f64,
    pub velocity_l1: f64,
    pub ratio: Option<f64>,
}

/// Log-log slope of distance against ‖Δv‖ over the family, for one (γ, λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub gamma: f64,
    pub lambda: f64,
    /// Absent when fewer than two members have a distance strictly between
    /// 0 and the saturation cap.
    pub slope: Option<f64>,
    pub max_ratio: Option<f64>,
    /// Family members that entered the fit.
    pub members: usize,
}

/// Members whose distance reaches this fraction of |B_r| are left out of
/// the fit: the distance is capped by |B_r| and no longer carries a rate.
/// So are members at distance 0, which meet any linear bound.
pub const SATURATION: f64 = 0.5;

/// Smallest log-log slope accepted as "at most linear growth".
pub const MIN_ENVELOPE_SLOPE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFamilyReport {
    pub rows: Vec<FamilyRow>,
    pub fits: Vec<EnvelopeFit>,
    /// Perturbation sizes that entered no fit with a slope.
    pub unfitted_deltas: Vec<f64>,
}

impl ProbeFamilyReport {
    /// Every fit with a slope meets `MIN_ENVELOPE_SLOPE`, at least one fit
    /// has a slope, and every δ entered some fit.
    pub fn passed(&self) -> bool {
        self.unfitted_deltas.is_empty()
            && self.fits.iter().any(|f| f.slope.is_some())
            && self.fits.iter().all(|f| f.slope.is_none_or(|s| s >= MIN_ENVELOPE_SLOPE))
    }

    pub fn write_rows(&self, out: impl Write) -> Result<()> {
        write_table(out, "probe_family", &[], &self.rows)
    }

    pub fn write_fits(&self, out: impl Write) -> Result<()> {
        write_table(out, "probe_fits", &[], &self.fits)
    }
}

/// Runs `base` and one weight perturbation per δ, and fits the envelope.
pub fn run_probe_family(base: &VortexBlobField, cfg: &ProbeFamilyConfig) -> Result<ProbeFamilyReport> {
    if cfg.deltas.is_empty() {
        return Err(Error::param("deltas", "is empty"));
    }
    cfg.probe.validate()?;
    let run = |f: &VortexBlobField| -> Result<ProbeSample> {
        let flow = integrate_flow(f, cfg.t_end, &cfg.flow, Vec::<Vec2>::new())?;
        ProbeSample::new(&flow, &cfg.probe)
    };
    let reference = run(base)?;
    let mut rows = Vec::new();
    for &delta in &cfg.deltas {
        let member = run(&perturb_weight(base, cfg.target, delta)?)?;
        for r in compare(&reference, &member, &cfg.probe)?.rows {
            rows.push(FamilyRow {
                delta,
                gamma: r.gamma,
                lambda: r.lambda,
                distance: r.distance,
                velocity_l1: r.velocity_l1,
                ratio: r.ratio,
            });
        }
    }
    let cap = SATURATION * PI * cfg.probe.radius * cfg.probe.radius;
    let mut fits = Vec::new();
    let mut fitted: Vec<f64> = Vec::new();
    for &gamma in &cfg.probe.gammas {
        for &f in &cfg.probe.lambda_factors {
            let lambda = f * cfg.probe.radius;
            let mine: Vec<&FamilyRow> = rows.iter().filter(|r| r.gamma == gamma && r.lambda == lambda).collect();
            let usable: Vec<&&FamilyRow> = mine
                .iter()
                .filter(|r| r.distance > 0.0 && r.distance < cap && r.velocity_l1 > 0.0)
                .collect();
            let slope = if usable.len() >= 2 {
                fitted.extend(usable.iter().map(|r| r.delta));
                let xs: Vec<f64> = usable.iter().map(|r| r.velocity_l1.ln()).collect();
                let ys: Vec<f64> = usable.iter().map(|r| r.distance.ln()).collect();
                least_squares_slope(&xs, &ys).ok()
            } else {
                None
            };
            let max_ratio = mine.iter().filter_map(|r| r.ratio).reduce(f64::max);
            fits.push(EnvelopeFit {
                gamma,
                lambda,
                slope,
                max_ratio,
                members: if usable.len() >= 2 { usable.len() } else { 0 },
            });
        }
    }
    let unfitted_deltas = cfg.deltas.iter().copied().filter(|d| !fitted.contains(d)).collect();
    Ok(ProbeFamilyReport {
        rows,
        fits,
        unfitted_deltas,
    })
}
