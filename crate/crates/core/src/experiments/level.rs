use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{pairing_dictionary, weak_l1_pairing};
use crate::field::{
    discretize_on, equi_integrability_modulus, l1_norm, sample_vorticity, InitialVorticitySpec, MollifierSpec,
    VelocityEvaluator, VortexBlobField,
};
use crate::flow::{integrate_flow, measure_distance_on, Cohort, FlowConfig, FlowMap, Labels};
use crate::grid::Grid;
use crate::sum::pairwise;
use crate::{Error, Result, Vec2};

/// Where and how often two runs are compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSetup {
    /// Radius r of the ball B_r on which every distance is taken.
    pub radius: f64,
    /// Spacing of the flow labels.
    pub label_spacing: f64,
    /// Spacing of the cells on which vorticity is sampled.
    pub vorticity_spacing: f64,
    /// Number of checkpoint times, including 0 and T; the flow distance is
    /// a maximum over the checkpoint lattice in (s, t).
    pub checkpoints: usize,
    /// Level γ of the flow measure distance.
    pub gamma: f64,
}

impl Default for MetricSetup {
    fn default() -> Self {
        Self {
            radius: 2.0,
            label_spacing: 0.04,
            vorticity_spacing: 0.01,
            checkpoints: 5,
            gamma: 0.05,
        }
    }
}

impl MetricSetup {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radius", self.radius),
            ("label_spacing", self.label_spacing),
            ("vorticity_spacing", self.vorticity_spacing),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.checkpoints < 2 {
            return Err(Error::param("checkpoints", "need at least 0 and T"));
        }
        Ok(())
    }

    pub fn labels(&self) -> Result<Labels> {
        let g = Grid::covering_ball(Vec2::ZERO, self.radius, self.label_spacing)?;
        Ok(Labels::grid_in_ball(g, Vec2::ZERO, self.radius))
    }

    fn vorticity_points(&self) -> Result<(Vec<Vec2>, f64)> {
        let g = Grid::covering_ball(Vec2::ZERO, self.radius, self.vorticity_spacing)?;
        Ok((g.points_in_ball(Vec2::ZERO, self.radius), g.cell_area()))
    }

    pub fn times(&self, t_end: f64) -> Vec<f64> {
        let n = self.checkpoints - 1;
        (0..=n).map(|k| if k == n { t_end } else { t_end * k as f64 / n as f64 }).collect()
    }
}

/// Blob field of `spec` on a carrier lattice of the given spacing, aligned
/// with the support box.
pub fn discretize_spaced(spec: &InitialVorticitySpec, eps: f64, spacing: f64) -> Result<VortexBlobField> {
    spec.validate()?;
    let Some((lo, hi)) = spec.support_box() else {
        return VortexBlobField::empty(eps, MollifierSpec::gaussian());
    };
    discretize_on(spec, eps, &Grid::covering_box(lo, hi, spacing)?, MollifierSpec::gaussian())
}

/// Everything the metrics need from one run, sampled at the checkpoints.
#[derive(Debug, Clone)]
pub struct LevelRun {
    pub field0: VortexBlobField,
    pub flow: FlowMap,
    pub times: Vec<f64>,
    /// X(s, t, label) indexed `[t][s][label]`.
    pub lattice: Vec<Vec<Vec<Vec2>>>,
    /// Blob vorticity on the vorticity cells, per checkpoint.
    pub vorticity: Vec<Vec<f64>>,
    /// Velocity at the labels, per checkpoint.
    pub velocity: Vec<Vec<Vec2>>,
    /// ⟨ω(t), g⟩ for each dictionary entry g, per checkpoint.
    pub pairings: Vec<Vec<f64>>,
    /// Σ Γᵢ per checkpoint.
    pub circulation: Vec<f64>,
}

impl LevelRun {
    pub fn solve(field0: VortexBlobField, t_end: f64, cfg: &FlowConfig, setup: &MetricSetup) -> Result<Self> {
        let flow = integrate_flow(&field0, t_end, cfg, Vec::<Vec2>::new())?;
        Self::from_flow(flow, setup)
    }

    /// Samples a finished flow whose history holds blob fields.
    pub fn from_flow(flow: FlowMap, setup: &MetricSetup) -> Result<Self> {
        setup.validate()?;
        let field0 = flow
            .history()
            .field_at(0.0)?
            .ok_or_else(|| Error::param("flow", "history holds no blob field"))?;
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
        let (cells, _) = setup.vorticity_points()?;
        let dictionary = pairing_dictionary();
        let mut vorticity = Vec::new();
        let mut velocity = Vec::new();
        let mut pairings = Vec::new();
        let mut circulation = Vec::new();
        for &t in &times {
            let field = flow.history().field_at(t)?.expect("blob history");
            vorticity.push(sample_vorticity(&field, &cells));
            velocity.push(VelocityEvaluator::new(field.clone(), flow.config().velocity)?.eval(labels.points()));
            pairings.push(dictionary.iter().map(|g| weak_l1_pairing(&field, g)).collect());
            circulation.push(field.total_circulation());
        }
        Ok(Self {
            field0,
            flow,
            times,
            lattice,
            vorticity,
            velocity,
            pairings,
            circulation,
        })
    }

    /// The stationary run of zero vorticity: X(s, t, x) = x.
    pub fn at_rest(setup: &MetricSetup, t_end: f64) -> Result<Self> {
        let empty = VortexBlobField::empty(1.0, MollifierSpec::gaussian())?;
        let cfg = FlowConfig::new(t_end);
        Self::solve(empty, t_end, &cfg, setup)
    }

    pub fn l1_norm(&self) -> f64 {
        l1_norm(&self.field0)
    }

    /// Largest |Σ Γᵢ(t) − Σ Γᵢ(0)| over the checkpoints.
    pub fn circulation_drift(&self) -> f64 {
        self.circulation.iter().map(|c| (c - self.circulation[0]).abs()).fold(0.0, f64::max)
    }
}

/// Distances between two runs on the same metric setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    /// max over the (s, t) lattice of ℒ²(B_r ∩ {|X_a − X_b| > γ}).
    pub flow: f64,
    /// max over t of ‖ω_a(t) − ω_b(t)‖_{L¹(B_r)}.
    pub vorticity: f64,
    /// max over t of ‖v_a(t) − v_b(t)‖_{L¹(B_r)}.
    pub velocity: f64,
    /// max over t and the dictionary of |⟨ω_a(t) − ω_b(t), g⟩|.
    pub pairing: f64,
}

pub fn distances(a: &LevelRun, b: &LevelRun, setup: &MetricSetup) -> Result<Distances> {
    if a.times != b.times {
        return Err(Error::GridMismatch("runs have different checkpoints".into()));
    }
    let labels = setup.labels()?;
    let label_area = setup.label_spacing * setup.label_spacing;
    let (_, cell_area) = setup.vorticity_points()?;
    let mut flow: f64 = 0.0;
    for (ra, rb) in a.lattice.iter().zip(&b.lattice) {
        for (xa, xb) in ra.iter().zip(rb) {
            flow = flow.max(measure_distance_on(&labels, xa, xb, setup.gamma, setup.radius)?);
        }
    }
    let l1 = |d: Vec<f64>, area: f64| pairwise(&d) * area;
    let mut vorticity: f64 = 0.0;
    let mut velocity: f64 = 0.0;
    let mut pairing: f64 = 0.0;
    for k in 0..a.times.len() {
        let dw: Vec<f64> = a.vorticity[k].par_iter().zip(&b.vorticity[k]).map(|(x, y)| (x - y).abs()).collect();
        vorticity = vorticity.max(l1(dw, cell_area));
        let dv: Vec<f64> = a.velocity[k].iter().zip(&b.velocity[k]).map(|(x, y)| (*x - *y).norm()).collect();
        velocity = velocity.max(l1(dv, label_area));
        for (pa, pb) in a.pairings[k].iter().zip(&b.pairings[k]) {
            pairing = pairing.max((pa - pb).abs());
        }
    }
    Ok(Distances {
        flow,
        vorticity,
        velocity,
        pairing,
    })
}

/// Threshold on sup_level ω-mass in a set of area `EQUI_DELTA`, relative
/// to the L¹ norm, above which a family is treated as concentrating.
pub const EQUI_LIMIT: f64 = 0.5;
pub const EQUI_DELTA: f64 = 0.05;

/// Modulus of each field at `EQUI_DELTA`; fails when one exceeds
/// `EQUI_LIMIT` of its mass.
pub fn check_equi_integrable(fields: &[&VortexBlobField]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            let m = equi_integrability_modulus(f, EQUI_DELTA)?.value;
            let mass = l1_norm(f);
            if mass > 0.0 && m > EQUI_LIMIT * mass {
                return Err(Error::param(
                    "initial data",
                    format!("family is not uniformly equi-integrable: {m:.3e} of {mass:.3e} sits in area {EQUI_DELTA}"),
                ));
            }
            Ok(m)
        })
        .collect()
}
