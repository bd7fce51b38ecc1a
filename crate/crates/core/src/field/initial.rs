//! Initial vorticity profiles ω⁰ ∈ L¹(ℝ²).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::{Error, Result, Vec2};

/// Lamb-Oseen profiles are cut at this many core radii; the discarded
/// mass fraction is e^{−36}.
pub const LAMB_OSEEN_CUTOFF: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Patch {
    #[serde(default)]
    pub center: Vec2,
    pub radius: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointVortex {
    pub position: Vec2,
    pub circulation: f64,
}

/// Initial vorticity. Each kind has an exact pointwise formula:
///
/// * `rankine`: ω = strength·1{|x − c| ≤ radius}.
/// * `lamb_oseen`: ω = Γ/(πa²)·e^{−|x−c|²/a²} for |x − c| ≤ 6a, else 0.
/// * `patch_union`: ω = Σ strengthₖ·1{|x − cₖ| ≤ rₖ}.
/// * `sign_changing_pair`: +strength on B_radius((−d/2, 0)), −strength on
///   B_radius((d/2, 0)), d the separation.
/// * `point_vortex_array`: atomic data Σ Γₖ δ_{xₖ}; no pointwise density
///   (evaluates to 0), discretized as-is.
/// * `file_samples`: piecewise constant on the cells of a uniform grid
///   read from CSV rows `x1,x2,omega` (cell centres).
/// * `oscillating`: base(x)·(−1)^{⌊n x₁⌋ + ⌊n x₂⌋}, a checkerboard of
///   cell size 1/n. |ω| does not depend on n.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialVorticitySpec {
    Rankine {
        #[serde(default = "one")]
        strength: f64,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        center: Vec2,
    },
    LambOseen {
        #[serde(default = "one")]
        circulation: f64,
        #[serde(default = "default_core")]
        core_radius: f64,
        #[serde(default)]
        center: Vec2,
    },
    PatchUnion {
        patches: Vec<Patch>,
    },
    SignChangingPair {
        #[serde(default = "one")]
        strength: f64,
        #[serde(default = "half")]
        radius: f64,
        #[serde(default = "two")]
        separation: f64,
    },
    PointVortexArray {
        vortices: Vec<PointVortex>,
    },
    FileSamples {
        path: PathBuf,
        #[serde(skip)]
        table: SampleCache,
    },
    Oscillating {
        base: Box<InitialVorticitySpec>,
        frequency: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn default_core() -> f64 {
    0.5
}

impl Default for InitialVorticitySpec {
    fn default() -> Self {
        Self::rankine(1.0, 1.0)
    }
}

impl InitialVorticitySpec {
    pub fn rankine(strength: f64, radius: f64) -> Self {
        Self::Rankine {
            strength,
            radius,
            center: Vec2::ZERO,
        }
    }

    pub fn sign_changing_pair(strength: f64, radius: f64, separation: f64) -> Self {
        Self::SignChangingPair {
            strength,
            radius,
            separation,
        }
    }

    pub fn point_vortices(vortices: Vec<PointVortex>) -> Self {
        Self::PointVortexArray { vortices }
    }

    pub fn oscillating(base: InitialVorticitySpec, frequency: f64) -> Self {
        Self::Oscillating {
            base: Box::new(base),
            frequency,
        }
    }

    /// In-memory tabulated data, as if read from `file_samples`.
    pub fn from_samples(table: SampleTable) -> Self {
        let cache = SampleCache::default();
        let _ = cache.0.set(Ok(Arc::new(table)));
        Self::FileSamples {
            path: PathBuf::new(),
            table: cache,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Rankine { .. } => "rankine",
            Self::LambOseen { .. } => "lamb_oseen",
            Self::PatchUnion { .. } => "patch_union",
            Self::SignChangingPair { .. } => "sign_changing_pair",
            Self::PointVortexArray { .. } => "point_vortex_array",
            Self::FileSamples { .. } => "file_samples",
            Self::Oscillating { .. } => "oscillating",
        }
    }

    /// Checks parameters and loads tabulated data.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite"))
            }
        };
        match self {
            Self::Rankine {
                strength,
                radius,
                center,
            } => {
                finite("strength", *strength)?;
                positive("radius", *radius)?;
                finite("center", center.x1 + center.x2)
            }
            Self::LambOseen {
                circulation,
                core_radius,
                center,
            } => {
                finite("circulation", *circulation)?;
                positive("core_radius", *core_radius)?;
                finite("center", center.x1 + center.x2)
            }
            Self::PatchUnion { patches } => {
                if patches.is_empty() {
                    return Err(Error::param("patches", "empty patch list"));
                }
                for p in patches {
                    finite("strength", p.strength)?;
                    positive("radius", p.radius)?;
                    finite("center", p.center.x1 + p.center.x2)?;
                }
                Ok(())
            }
            Self::SignChangingPair {
                strength,
                radius,
                separation,
            } => {
                finite("strength", *strength)?;
                positive("radius", *radius)?;
                positive("separation", *separation)
            }
            Self::PointVortexArray { vortices } => {
                for v in vortices {
                    finite("circulation", v.circulation)?;
                    if !v.position.is_finite() {
                        return Err(Error::NonFinite("vortex position"));
                    }
                }
                Ok(())
            }
            Self::FileSamples { path, table } => table.get(path).map(|_| ()),
            Self::Oscillating { base, frequency } => {
                positive("frequency", *frequency)?;
                if matches!(**base, Self::PointVortexArray { .. }) {
                    return Err(Error::param("base", "oscillation needs a density, not point vortices"));
                }
                base.validate()
            }
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Self::PointVortexArray { .. })
    }

    /// Pointwise value ω⁰(x). Atomic data evaluate to 0; unreadable
    /// tabulated data to NaN (call [`validate`](Self::validate) first).
    pub fn eval(&self, x: Vec2) -> f64 {
        match self {
            Self::Rankine {
                strength,
                radius,
                center,
            } => {
                if (x - *center).norm_sq() <= radius * radius {
                    *strength
                } else {
                    0.0
                }
            }
            Self::LambOseen {
                circulation,
                core_radius,
                center,
            } => {
                let s2 = (x - *center).norm_sq() / (core_radius * core_radius);
                if s2 <= LAMB_OSEEN_CUTOFF * LAMB_OSEEN_CUTOFF {
                    circulation / (PI * core_radius * core_radius) * (-s2).exp()
                } else {
                    0.0
                }
            }
            Self::PatchUnion { patches } => patches
                .iter()
                .filter(|p| (x - p.center).norm_sq() <= p.radius * p.radius)
                .map(|p| p.strength)
                .sum(),
            Self::SignChangingPair {
                strength,
                radius,
                separation,
            } => {
                let c = Vec2::new(0.5 * separation, 0.0);
                let r2 = radius * radius;
                if (x + c).norm_sq() <= r2 {
                    *strength
                } else if (x - c).norm_sq() <= r2 {
                    -strength
                } else {
                    0.0
                }
            }
            Self::PointVortexArray { .. } => 0.0,
            Self::FileSamples { path, table } => match table.get(path) {
                Ok(t) => t.eval(x),
                Err(_) => f64::NAN,
            },
            Self::Oscillating { base, frequency } => {
                let b = base.eval(x);
                if b == 0.0 {
                    return 0.0;
                }
                let parity = (frequency * x.x1).floor() + (frequency * x.x2).floor();
                if parity.rem_euclid(2.0) == 0.0 {
                    b
                } else {
                    -b
                }
            }
        }
    }

    /// Closed box containing the support, or `None` for empty data.
    pub fn support_box(&self) -> Option<(Vec2, Vec2)> {
        let ball = |c: Vec2, r: f64| Some((c - Vec2::new(r, r), c + Vec2::new(r, r)));
        match self {
            Self::Rankine { radius, center, .. } => ball(*center, *radius),
            Self::LambOseen {
                core_radius, center, ..
            } => ball(*center, LAMB_OSEEN_CUTOFF * core_radius),
            Self::PatchUnion { patches } => patches
                .iter()
                .filter_map(|p| ball(p.center, p.radius))
                .reduce(union_box),
            Self::SignChangingPair {
                radius, separation, ..
            } => {
                let c = Vec2::new(0.5 * separation, 0.0);
                union_box(ball(-c, *radius)?, ball(c, *radius)?).into()
            }
            Self::PointVortexArray { vortices } => vortices
                .iter()
                .map(|v| (v.position, v.position))
                .reduce(union_box),
            Self::FileSamples { path, table } => {
                let t = table.get(path).ok()?;
                let g = t.grid;
                let hi = g.corner + Vec2::new(g.nx as f64 * g.spacing, g.ny as f64 * g.spacing);
                Some((g.corner, hi))
            }
            Self::Oscillating { base, .. } => base.support_box(),
        }
    }

    /// Radius of the smallest origin-centred ball containing the support.
    pub fn support_radius(&self) -> f64 {
        match self.support_box() {
            Some((lo, hi)) => [lo, hi, Vec2::new(lo.x1, hi.x2), Vec2::new(hi.x1, lo.x2)]
                .iter()
                .map(|p| p.norm())
                .fold(0.0, f64::max),
            None => 0.0,
        }
    }

    /// ‖ω⁰‖_{L¹} where a closed form exists.
    pub fn exact_l1_norm(&self) -> Option<f64> {
        match self {
            Self::Rankine {
                strength, radius, ..
            } => Some(strength.abs() * PI * radius * radius),
            Self::LambOseen { circulation, .. } => {
                Some(circulation.abs() * -(-LAMB_OSEEN_CUTOFF * LAMB_OSEEN_CUTOFF).exp_m1())
            }
            Self::SignChangingPair {
                strength,
                radius,
                separation,
            } if *separation >= 2.0 * radius => Some(2.0 * strength.abs() * PI * radius * radius),
            Self::PointVortexArray { vortices } => {
                Some(vortices.iter().map(|v| v.circulation.abs()).sum())
            }
            Self::Oscillating { base, .. } => base.exact_l1_norm(),
            Self::PatchUnion { patches } => {
                let disjoint = patches.iter().enumerate().all(|(i, p)| {
                    patches[i + 1..]
                        .iter()
                        .all(|q| p.center.dist(q.center) >= p.radius + q.radius)
                });
                disjoint.then(|| patches.iter().map(|p| p.strength.abs() * PI * p.radius * p.radius).sum())
            }
            _ => None,
        }
    }

    /// ∫ω⁰ where a closed form exists.
    pub fn exact_circulation(&self) -> Option<f64> {
        match self {
            Self::Rankine {
                strength, radius, ..
            } => Some(strength * PI * radius * radius),
            Self::LambOseen { circulation, .. } => {
                Some(circulation * -(-LAMB_OSEEN_CUTOFF * LAMB_OSEEN_CUTOFF).exp_m1())
            }
            Self::SignChangingPair { .. } => Some(0.0),
            Self::PatchUnion { patches } => {
                Some(patches.iter().map(|p| p.strength * PI * p.radius * p.radius).sum())
            }
            Self::PointVortexArray { vortices } => Some(vortices.iter().map(|v| v.circulation).sum()),
            _ => None,
        }
    }
}

fn union_box(a: (Vec2, Vec2), b: (Vec2, Vec2)) -> (Vec2, Vec2) {
    (
        Vec2::new(a.0.x1.min(b.0.x1), a.0.x2.min(b.0.x2)),
        Vec2::new(a.1.x1.max(b.1.x1), a.1.x2.max(b.1.x2)),
    )
}

/// Lazily loaded, shared sample table.
#[derive(Debug, Clone, Default)]
pub struct SampleCache(Arc<OnceLock<std::result::Result<Arc<SampleTable>, String>>>);

impl SampleCache {
    fn get(&self, path: &Path) -> Result<Arc<SampleTable>> {
        self.0
            .get_or_init(|| SampleTable::read_csv(path).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(Error::Format)
    }
}

/// Vorticity samples at the cell centres of a uniform grid; cells absent
/// from the input are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub grid: Grid,
    pub values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    x1: f64,
    x2: f64,
    omega: f64,
}

impl SampleTable {
    /// Builds the table from scattered `(x, ω)` rows lying on a uniform
    /// lattice. The spacing is the smallest positive coordinate gap.
    pub fn from_rows(rows: &[(Vec2, f64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Format("no vorticity samples".into()));
        }
        if rows.iter().any(|(x, w)| !x.is_finite() || !w.is_finite()) {
            return Err(Error::NonFinite("vorticity samples"));
        }
        let spacing = min_gap(rows.iter().map(|r| r.0.x1)).min(min_gap(rows.iter().map(|r| r.0.x2)));
        let spacing = if spacing.is_finite() { spacing } else { 1.0 };
        let lo = rows.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |a, r| {
            Vec2::new(a.x1.min(r.0.x1), a.x2.min(r.0.x2))
        });
        let hi = rows.iter().fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, r| {
            Vec2::new(a.x1.max(r.0.x1), a.x2.max(r.0.x2))
        });
        let nx = ((hi.x1 - lo.x1) / spacing).round() as usize + 1;
        let ny = ((hi.x2 - lo.x2) / spacing).round() as usize + 1;
        let grid = Grid::new(lo - Vec2::new(0.5 * spacing, 0.5 * spacing), spacing, nx, ny)?;
        let mut values = vec![0.0; grid.len()];
        let mut seen = HashMap::new();
        for &(x, w) in rows {
            let i = ((x.x1 - lo.x1) / spacing).round() as usize;
            let j = ((x.x2 - lo.x2) / spacing).round() as usize;
            if (grid.center(i, j) - x).norm() > 1e-6 * spacing {
                return Err(Error::Format(format!(
                    "sample at ({}, {}) is off the lattice of spacing {spacing}",
                    x.x1, x.x2
                )));
            }
            if seen.insert((i, j), ()).is_some() {
                return Err(Error::Format(format!("duplicate sample at ({}, {})", x.x1, x.x2)));
            }
            values[j * nx + i] = w;
        }
        Ok(Self { grid, values })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut rows = Vec::new();
        for rec in reader.deserialize() {
            let r: SampleRow = rec?;
            rows.push((Vec2::new(r.x1, r.x2), r.omega));
        }
        Self::from_rows(&rows)
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        match self.grid.locate(x) {
            Some((i, j)) => self.values[j * self.grid.nx + i],
            None => 0.0,
        }
    }
}

fn min_gap(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 1e-12 * (1.0 + max_abs(&v)))
        .fold(f64::INFINITY, f64::min)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a: f64, b| a.max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_formulas() {
        let r = InitialVorticitySpec::rankine(2.0, 1.0);
        assert_eq!(r.eval(Vec2::new(0.5, 0.5)), 2.0);
        assert_eq!(r.eval(Vec2::new(1.0, 0.0)), 2.0);
        assert_eq!(r.eval(Vec2::new(1.0, 0.1)), 0.0);

        let p = InitialVorticitySpec::sign_changing_pair(1.0, 0.5, 2.0);
        assert_eq!(p.eval(Vec2::new(-1.0, 0.2)), 1.0);
        assert_eq!(p.eval(Vec2::new(1.0, 0.2)), -1.0);
        assert_eq!(p.eval(Vec2::ZERO), 0.0);
        assert_eq!(p.exact_circulation(), Some(0.0));
    }

    #[test]
    fn oscillation_flips_sign_per_cell() {
        let s = InitialVorticitySpec::oscillating(InitialVorticitySpec::rankine(1.0, 1.0), 4.0);
        assert_eq!(s.eval(Vec2::new(0.1, 0.1)), 1.0);
        assert_eq!(s.eval(Vec2::new(0.3, 0.1)), -1.0);
        assert_eq!(s.eval(Vec2::new(-0.1, 0.1)), -1.0);
        assert_eq!(s.eval(Vec2::new(-0.1, -0.1)), 1.0);
    }

    #[test]
    fn sample_table_roundtrip() {
        let rows: Vec<(Vec2, f64)> = (0..4)
            .flat_map(|i| (0..3).map(move |j| (Vec2::new(0.25 * i as f64, 0.25 * j as f64), (i + j) as f64)))
            .collect();
        let t = SampleTable::from_rows(&rows).unwrap();
        assert_eq!((t.grid.nx, t.grid.ny), (4, 3));
        assert_eq!(t.eval(Vec2::new(0.5, 0.25)), 3.0);
        assert_eq!(t.eval(Vec2::new(0.55, 0.2)), 3.0);
        assert_eq!(t.eval(Vec2::new(5.0, 0.0)), 0.0);
        let off = [(Vec2::ZERO, 1.0), (Vec2::new(1.0, 0.0), 1.0), (Vec2::new(0.5, 0.3), 1.0)];
        assert!(SampleTable::from_rows(&off).is_err());
    }
}
