use serde::{Deserialize, Serialize};

use crate::field::{VelocityEvaluator, VelocityMethod, VortexBlobField};
use crate::{Error, Result, Vec2};

/// Closed-form velocity fields for tests of the flow machinery. All but
/// `Contraction` are divergence-free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticField {
    Zero,
    /// b(x) = −rate·x.
    Contraction { rate: f64 },
    /// b(x) = Ω x^⊥.
    Rotation { angular_velocity: f64 },
    /// b(x) = c.
    Translation { velocity: Vec2 },
}

impl AnalyticField {
    pub fn velocity(&self, x: Vec2) -> Vec2 {
        match *self {
            Self::Zero => Vec2::ZERO,
            Self::Contraction { rate } => x * -rate,
            Self::Rotation { angular_velocity } => x.perp() * angular_velocity,
            Self::Translation { velocity } => velocity,
        }
    }
}

/// Blob carriers sampled at snapshot times, with their velocities, so the
/// carrier positions can be interpolated by cubic Hermite polynomials.
#[derive(Debug, Clone)]
pub struct CarrierHistory {
    pub(crate) template: VortexBlobField,
    pub(crate) method: VelocityMethod,
    pub(crate) times: Vec<f64>,
    pub(crate) positions: Vec<Vec<Vec2>>,
    pub(crate) velocities: Vec<Vec<Vec2>>,
}

impl CarrierHistory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// The blob field at snapshot `k`.
    pub fn snapshot(&self, k: usize) -> VortexBlobField {
        self.template
            .moved_to(self.positions[k].clone())
            .expect("snapshot positions are finite")
    }

    pub fn snapshot_velocities(&self, k: usize) -> &[Vec2] {
        &self.velocities[k]
    }

    /// Carrier positions at time t by Hermite interpolation between the
    /// bracketing snapshots; exact at snapshot times.
    pub fn positions_at(&self, t: f64) -> Result<Vec<Vec2>> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        let tol = 1e-9 * (t1 - t0).abs().max(1.0);
        if t < t0 - tol || t > t1 + tol {
            return Err(Error::TimeOutOfRange {
                time: t,
                start: t0,
                end: t1,
            });
        }
        let t = t.clamp(t0, t1);
        let k = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => return Ok(self.positions[k].clone()),
            Err(k) => k.clamp(1, self.times.len() - 1) - 1,
        };
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = (s3 - 2.0 * s2 + s) * h;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = (s3 - s2) * h;
        let (p0, p1) = (&self.positions[k], &self.positions[k + 1]);
        let (v0, v1) = (&self.velocities[k], &self.velocities[k + 1]);
        Ok((0..p0.len())
            .map(|i| p0[i] * h00 + v0[i] * h10 + p1[i] * h01 + v1[i] * h11)
            .collect())
    }

    pub fn field_at(&self, t: f64) -> Result<VortexBlobField> {
        self.template.moved_to(self.positions_at(t)?)
    }
}

/// The time-dependent velocity a flow map was integrated in.
#[derive(Debug, Clone)]
pub enum FieldHistory {
    /// One blob field for all times.
    Frozen(VortexBlobField, VelocityMethod),
    Carriers(CarrierHistory),
    Analytic(AnalyticField),
}

impl FieldHistory {
    /// Blob field at time t, if the history is made of blobs.
    pub fn field_at(&self, t: f64) -> Result<Option<VortexBlobField>> {
        match self {
            Self::Frozen(f, _) => Ok(Some(f.clone())),
            Self::Carriers(c) => c.field_at(t).map(Some),
            Self::Analytic(_) => Ok(None),
        }
    }

    /// A reusable evaluator for the velocity at time t.
    pub fn evaluator_at(&self, t: f64) -> Result<TimeSlice> {
        Ok(match self {
            Self::Frozen(f, m) => TimeSlice::Blobs(VelocityEvaluator::new(f.clone(), *m)?),
            Self::Carriers(c) => TimeSlice::Blobs(VelocityEvaluator::new(c.field_at(t)?, c.method)?),
            Self::Analytic(a) => TimeSlice::Analytic(*a),
        })
    }

    pub fn velocity_at(&self, t: f64, points: &[Vec2]) -> Result<Vec<Vec2>> {
        Ok(self.evaluator_at(t)?.eval(points))
    }

    pub fn is_time_independent(&self) -> bool {
        !matches!(self, Self::Carriers(_))
    }
}

/// The velocity field frozen at one instant.
#[derive(Debug, Clone)]
pub enum TimeSlice {
    Blobs(VelocityEvaluator),
    Analytic(AnalyticField),
}

impl TimeSlice {
    pub fn eval(&self, points: &[Vec2]) -> Vec<Vec2> {
        match self {
            Self::Blobs(e) => e.eval(points),
            Self::Analytic(a) => points.iter().map(|&x| a.velocity(x)).collect(),
        }
    }
}
