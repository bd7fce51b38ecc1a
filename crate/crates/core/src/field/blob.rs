use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::initial::InitialVorticitySpec;
use super::mollifier::MollifierSpec;
use crate::grid::Grid;
use crate::sum::{pairwise, ScalarCascade};
use crate::{Error, Result, Vec2};

/// Weighted particles x_i with circulations Γ_i, read as the vorticity
/// ω_ε = Σ Γ_i ρ_ε(· − x_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexBlobField {
    positions: Vec<Vec2>,
    weights: Vec<f64>,
    blob_scale: f64,
    mollifier: MollifierSpec,
}

impl VortexBlobField {
    pub fn new(positions: Vec<Vec2>, weights: Vec<f64>, blob_scale: f64, mollifier: MollifierSpec) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::param(
                "weights",
                format!("{} weights for {} positions", weights.len(), positions.len()),
            ));
        }
        if !(blob_scale > 0.0 && blob_scale.is_finite()) {
            return Err(Error::param("blob_scale", format!("must be positive, got {blob_scale}")));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("blob positions"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("blob weights"));
        }
        Ok(Self {
            positions,
            weights,
            blob_scale,
            mollifier,
        })
    }

    pub fn empty(blob_scale: f64, mollifier: MollifierSpec) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), blob_scale, mollifier)
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn blob_scale(&self) -> f64 {
        self.blob_scale
    }

    pub fn mollifier(&self) -> &MollifierSpec {
        &self.mollifier
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same weights carried by new positions. Weights are copied bit for
    /// bit, so circulation is conserved exactly under advection.
    pub fn moved_to(&self, positions: Vec<Vec2>) -> Result<Self> {
        if positions.len() != self.len() {
            return Err(Error::param("positions", "particle count changed"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("blob positions"));
        }
        Ok(Self {
            positions,
            weights: self.weights.clone(),
            blob_scale: self.blob_scale,
            mollifier: self.mollifier,
        })
    }

    /// Field with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| c * w).collect(),
            ..self.clone()
        }
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.positions.clone(), weights, self.blob_scale, self.mollifier)
    }

    /// Σ Γ_i, in a fixed summation order.
    pub fn total_circulation(&self) -> f64 {
        pairwise(&self.weights)
    }

    /// Largest |x_i|.
    pub fn extent(&self) -> f64 {
        self.positions.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Bounding box of the particle positions.
    pub fn bounding_box(&self) -> Option<(Vec2, Vec2)> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(lo, hi), p| {
            (
                Vec2::new(lo.x1.min(p.x1), lo.x2.min(p.x2)),
                Vec2::new(hi.x1.max(p.x1), hi.x2.max(p.x2)),
            )
        }))
    }
}

/// Samples ω⁰ at the cell centres of a uniform grid with `n_per_axis`
/// cells along the longer side of its support box and assigns weights
/// Γ_i = ω⁰(x_i)·Δx². Cells where ω⁰ vanishes carry no particle. Point
/// vortex data are taken over unchanged.
pub fn discretize(spec: &InitialVorticitySpec, eps: f64, n_per_axis: usize) -> Result<VortexBlobField> {
    discretize_with(spec, eps, n_per_axis, MollifierSpec::gaussian())
}

pub fn discretize_with(
    spec: &InitialVorticitySpec,
    eps: f64,
    n_per_axis: usize,
    mollifier: MollifierSpec,
) -> Result<VortexBlobField> {
    if n_per_axis < 4 {
        return Err(Error::param("n_per_axis", format!("must be at least 4, got {n_per_axis}")));
    }
    spec.validate()?;
    if let InitialVorticitySpec::PointVortexArray { vortices } = spec {
        return VortexBlobField::new(
            vortices.iter().map(|v| v.position).collect(),
            vortices.iter().map(|v| v.circulation).collect(),
            eps,
            mollifier,
        );
    }
    let Some((lo, hi)) = spec.support_box() else {
        return VortexBlobField::empty(eps, mollifier);
    };
    let side = (hi.x1 - lo.x1).max(hi.x2 - lo.x2);
    let spacing = side / n_per_axis as f64;
    let grid = Grid::covering_box(lo, hi, spacing)?;
    discretize_on(spec, eps, &grid, mollifier)
}

/// Discretization on a caller-chosen carrier grid. Fails if the grid
/// misses more than 10⁻³ of the mass of ω⁰.
pub fn discretize_on(
    spec: &InitialVorticitySpec,
    eps: f64,
    grid: &Grid,
    mollifier: MollifierSpec,
) -> Result<VortexBlobField> {
    spec.validate()?;
    if spec.is_atomic() {
        return discretize_with(spec, eps, 4, mollifier);
    }
    let deficit = coverage_deficit(spec, grid)?;
    if deficit.0 > 1e-3 * deficit.1.max(f64::MIN_POSITIVE) {
        return Err(Error::Coverage { deficit: deficit.0 });
    }
    let area = grid.cell_area();
    let mut positions = Vec::new();
    let mut weights = Vec::new();
    for p in grid.points() {
        let w = spec.eval(p);
        if w != 0.0 {
            positions.push(p);
            weights.push(w * area);
        }
    }
    VortexBlobField::new(positions, weights, eps, mollifier)
}

/// (mass outside the grid, total mass), both by midpoint quadrature of
/// |ω⁰| over the support box at the grid's spacing.
fn coverage_deficit(spec: &InitialVorticitySpec, grid: &Grid) -> Result<(f64, f64)> {
    let Some((lo, hi)) = spec.support_box() else {
        return Ok((0.0, 0.0));
    };
    let probe = Grid::covering_box(lo, hi, grid.spacing)?;
    let mut outside = ScalarCascade::default();
    let mut total = ScalarCascade::default();
    for p in probe.points() {
        let w = spec.eval(p).abs() * probe.cell_area();
        total.add(w);
        if grid.locate(p).is_none() {
            outside.add(w);
        }
    }
    Ok((outside.finish(), total.finish()))
}

/// ω_ε(x) = Σ Γ_i ρ_ε(x − x_i).
pub fn eval_vorticity(field: &VortexBlobField, x: Vec2) -> f64 {
    let eps = field.blob_scale;
    let cut2 = field.mollifier.support_radius(eps).powi(2);
    let mut acc = ScalarCascade::default();
    for (p, w) in field.positions.iter().zip(&field.weights) {
        let r2 = (x - *p).norm_sq();
        if r2 < cut2 {
            acc.add(w * field.mollifier.density(r2, eps));
        }
    }
    acc.finish()
}

/// ω_ε at many points, using a bin index over the particles.
pub fn sample_vorticity(field: &VortexBlobField, points: &[Vec2]) -> Vec<f64> {
    if field.is_empty() {
        return vec![0.0; points.len()];
    }
    let eps = field.blob_scale;
    let cut = field.mollifier.support_radius(eps);
    let bins = Bins::new(field.positions(), cut);
    points
        .par_iter()
        .map(|&x| {
            let mut acc = ScalarCascade::default();
            bins.for_each_near(x, |k| {
                let r2 = (x - field.positions[k]).norm_sq();
                if r2 < cut * cut {
                    acc.add(field.weights[k] * field.mollifier.density(r2, eps));
                }
            });
            acc.finish()
        })
        .collect()
}

/// Σ|Γ_i|. For overlapping blobs of mixed sign this overestimates ‖ω_ε‖_{L¹}
/// by the cancellation within one blob width.
pub fn l1_norm(field: &VortexBlobField) -> f64 {
    let abs: Vec<f64> = field.weights.iter().map(|w| w.abs()).collect();
    pairwise(&abs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquiIntegrability {
    /// sup over sets of area ≤ δ of ∫|ω_ε|.
    pub value: f64,
    pub spacing: f64,
    /// Set when the evaluation cells are coarser than the blob scale.
    pub resolution_warning: bool,
}

/// Layer-cake evaluation of sup_{|E| ≤ δ} ∫_E |ω_ε| on cells of side ε/2
/// covering the particle box inflated by 4ε.
pub fn equi_integrability_modulus(field: &VortexBlobField, delta: f64) -> Result<EquiIntegrability> {
    equi_integrability_modulus_on(field, delta, 0.5 * field.blob_scale)
}

pub fn equi_integrability_modulus_on(field: &VortexBlobField, delta: f64, spacing: f64) -> Result<EquiIntegrability> {
    if !(delta > 0.0) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    if !(spacing > 0.0) {
        return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
    }
    let resolution_warning = spacing > field.blob_scale;
    let Some((lo, hi)) = field.bounding_box() else {
        return Ok(EquiIntegrability {
            value: 0.0,
            spacing,
            resolution_warning,
        });
    };
    let pad = 4.0 * field.blob_scale;
    let grid = Grid::covering_box(lo - Vec2::new(pad, pad), hi + Vec2::new(pad, pad), spacing)?;
    let mut values: Vec<f64> = sample_vorticity(field, &grid.points()).into_iter().map(f64::abs).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(EquiIntegrability {
        value: layer_cake_top(&values, grid.cell_area(), delta),
        spacing,
        resolution_warning,
    })
}

/// ∫ of the largest values over total area `delta`, for cell values
/// sorted descending; the last cell counts fractionally.
pub(crate) fn layer_cake_top(sorted_desc: &[f64], cell_area: f64, delta: f64) -> f64 {
    let mut acc = ScalarCascade::default();
    let mut covered = 0.0;
    for &v in sorted_desc {
        if covered >= delta || v == 0.0 {
            break;
        }
        let take = cell_area.min(delta - covered);
        acc.add(v * take);
        covered += take;
    }
    acc.finish()
}

/// Uniform bins of side `cell` over a point set.
pub(crate) struct Bins {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl Bins {
    pub(crate) fn new(points: &[Vec2], cell: f64) -> Self {
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = Vec2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
            hi = Vec2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
        }
        let span = (hi.x1 - lo.x1).max(hi.x2 - lo.x2);
        // Keep the table at most ~4 bins per point.
        let cell = cell.max(span / (2.0 * (points.len() as f64).sqrt() + 1.0)).max(f64::MIN_POSITIVE);
        let nx = ((hi.x1 - lo.x1) / cell) as usize + 1;
        let ny = ((hi.x2 - lo.x2) / cell) as usize + 1;
        let mut counts = vec![0usize; nx * ny + 1];
        let key = |p: &Vec2| {
            let i = (((p.x1 - lo.x1) / cell) as usize).min(nx - 1);
            let j = (((p.x2 - lo.x2) / cell) as usize).min(ny - 1);
            j * nx + i
        };
        for p in points {
            counts[key(p) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0; points.len()];
        for (idx, p) in points.iter().enumerate() {
            let k = key(p);
            items[fill[k]] = idx;
            fill[k] += 1;
        }
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            starts: counts,
            items,
        }
    }

    /// Visits every point in bins within one bin of `x`'s bin, in a fixed
    /// order. Callers filter by distance.
    pub(crate) fn for_each_near(&self, x: Vec2, mut f: impl FnMut(usize)) {
        let fi = ((x.x1 - self.origin.x1) / self.cell).floor();
        let fj = ((x.x2 - self.origin.x2) / self.cell).floor();
        if fi < -1.0 || fj < -1.0 || fi > self.nx as f64 || fj > self.ny as f64 {
            return;
        }
        let (ci, cj) = (fi as i64, fj as i64);
        for j in (cj - 1).max(0)..=(cj + 1).min(self.ny as i64 - 1) {
            for i in (ci - 1).max(0)..=(ci + 1).min(self.nx as i64 - 1) {
                let k = j as usize * self.nx + i as usize;
                for &idx in &self.items[self.starts[k]..self.starts[k + 1]] {
                    f(idx);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rankine_discretization_mass() {
        let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), 0.05, 256).unwrap();
        assert!((f.total_circulation() - PI).abs() < 0.01 * PI);
        assert!((l1_norm(&f) - PI).abs() < 0.01 * PI);
        assert_eq!(f.blob_scale(), 0.05);
    }

    #[test]
    fn sign_changing_pair_balances() {
        let f = discretize(&InitialVorticitySpec::sign_changing_pair(1.0, 0.5, 2.0), 0.05, 256).unwrap();
        assert!(f.total_circulation().abs() < 1e-12);
        assert!((l1_norm(&f) - PI / 2.0).abs() < 0.01 * PI / 2.0);
    }

    #[test]
    fn single_point_vortex() {
        let spec = InitialVorticitySpec::point_vortices(vec![super::super::initial::PointVortex {
            position: Vec2::new(0.2, 0.0),
            circulation: 1.0,
        }]);
        let f = discretize(&spec, 0.01, 16).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.weights(), &[1.0]);
    }

    #[test]
    fn coverage_error_reports_deficit() {
        let spec = InitialVorticitySpec::rankine(1.0, 1.0);
        let grid = Grid::covering_box(Vec2::new(-1.0, -1.0), Vec2::new(0.0, 1.0), 0.02).unwrap();
        match discretize_on(&spec, 0.05, &grid, MollifierSpec::gaussian()) {
            Err(Error::Coverage { deficit }) => assert!((deficit - PI / 2.0).abs() < 0.05),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn blob_vorticity_values() {
        let g = MollifierSpec::gaussian();
        let eps = 0.1;
        let one = VortexBlobField::new(vec![Vec2::ZERO], vec![1.0], eps, g).unwrap();
        assert!((eval_vorticity(&one, Vec2::ZERO) - 1.0 / (2.0 * PI * eps * eps)).abs() < 1e-12);
        let two = VortexBlobField::new(vec![Vec2::ZERO; 2], vec![1.0; 2], eps, g).unwrap();
        let x = Vec2::new(0.05, 0.02);
        assert_eq!(eval_vorticity(&two, x), 2.0 * eval_vorticity(&one, x));
        let bump = VortexBlobField::new(vec![Vec2::ZERO], vec![1.0], eps, MollifierSpec::compact_bump()).unwrap();
        assert_eq!(eval_vorticity(&bump, Vec2::new(0.5, 0.0)), 0.0);
        let pts = [Vec2::ZERO, x, Vec2::new(3.0, 3.0)];
        let s = sample_vorticity(&two, &pts);
        for (p, v) in pts.iter().zip(&s) {
            assert!((eval_vorticity(&two, *p) - v).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn l1_norm_homogeneity_and_empty() {
        let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), 0.05, 64).unwrap();
        assert!((l1_norm(&f.scaled(-3.0)) - 3.0 * l1_norm(&f)).abs() < 1e-12);
        assert_eq!(l1_norm(&VortexBlobField::empty(0.1, MollifierSpec::gaussian()).unwrap()), 0.0);
    }

    #[test]
    fn layer_cake_of_indicator() {
        let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), 0.02, 128).unwrap();
        let m = equi_integrability_modulus(&f, 0.5).unwrap();
        assert!((m.value - 0.5).abs() < 0.02 * 0.5, "{m:?}");
        assert!(!m.resolution_warning);
        let all = equi_integrability_modulus(&f, 4.0).unwrap();
        assert!((all.value - PI).abs() < 0.02 * PI);
        assert!(all.value <= l1_norm(&f) * (1.0 + 1e-9));
    }
}
