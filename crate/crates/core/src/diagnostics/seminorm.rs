use serde::{Deserialize, Serialize};

use crate::field::{l1_norm, VelocityEvaluator, VelocityMethod, VortexBlobField};
use crate::grid::Grid;
use crate::{Error, Result, Vec2};

/// Values sampled at the cell centres of a uniform grid, row-major with x₁
/// fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sampled field"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec2) -> f64) -> Result<Self> {
        let values = grid.points().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    /// |v| of a blob field on `grid`.
    pub fn speed(field: &VortexBlobField, grid: Grid, method: VelocityMethod) -> Result<Self> {
        let v = VelocityEvaluator::new(field.clone(), method)?.eval(&grid.points());
        Self::new(grid, v.into_iter().map(|u| u.norm()).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values of the cells whose centres lie in the closed ball B_r(0).
    fn in_ball(&self, r: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r2 = r * r;
        let g = self.grid;
        self.values.iter().enumerate().filter_map(move |(k, &v)| {
            let c = g.center(k % g.nx, k / g.nx);
            (c.norm_sq() <= r2).then_some((k, v))
        })
    }

    fn covers_ball(&self, r: f64) -> bool {
        let g = &self.grid;
        let hi = g.corner + Vec2::new(g.nx as f64 * g.spacing, g.ny as f64 * g.spacing);
        let slack = 0.5 * g.spacing;
        g.corner.x1 <= -r + slack && g.corner.x2 <= -r + slack && hi.x1 >= r - slack && hi.x2 >= r - slack
    }
}

/// Level sets smaller than this many cells do not enter the supremum: at
/// a few cells the lattice count overshoots the disk area by several
/// percent, always upward since the sup picks the worst shell.
pub const MIN_LEVEL_CELLS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M2Seminorm {
    /// sup_λ λ·ℒ²({|u| > λ} ∩ B_r)^{1/2}.
    pub value: f64,
    /// value², the form with the power taken.
    pub power: f64,
    /// Level at which the supremum is attained (approached from below).
    pub level: f64,
    /// Area of the level set there.
    pub area: f64,
}

/// Weak-L² seminorm of the samples restricted to B_r(0).
pub fn m2_seminorm(field: &SampledScalarField, domain_radius: f64) -> Result<f64> {
    Ok(m2_seminorm_detail(field, domain_radius)?.value)
}

/// The supremum is exact over the samples: λ·area is largest as λ rises to
/// a sample value, so only the sorted values need checking.
pub fn m2_seminorm_detail(field: &SampledScalarField, domain_radius: f64) -> Result<M2Seminorm> {
    if !(domain_radius > 0.0 && domain_radius.is_finite()) {
        return Err(Error::param("domain_radius", format!("must be positive, got {domain_radius}")));
    }
    if !field.covers_ball(domain_radius) {
        return Err(Error::GridMismatch(format!("samples do not cover the ball of radius {domain_radius}")));
    }
    let mut values: Vec<f64> = field.in_ball(domain_radius).map(|(_, v)| v.abs()).collect();
    if values.is_empty() {
        return Err(Error::GridMismatch("no sample inside the ball".into()));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    let cell = field.grid.cell_area();
    let mut best = M2Seminorm {
        value: 0.0,
        power: 0.0,
        level: 0.0,
        area: 0.0,
    };
    let mut k = 0;
    while k < values.len() && values[k] > 0.0 {
        let level = values[k];
        // Cells at or above the level are in {|u| > λ} for λ just below it.
        while k < values.len() && values[k] == level {
            k += 1;
        }
        if k < MIN_LEVEL_CELLS.min(values.len()) {
            continue;
        }
        let area = k as f64 * cell;
        let value = level * area.sqrt();
        if value > best.value {
            best = M2Seminorm {
                value,
                power: value * value,
                level,
                area,
            };
        }
    }
    Ok(best)
}

/// |||v|||_{M²(B_r)} / ‖ω‖_{L¹} for a blob field, with |v| sampled on cells
/// of side r/200.
pub fn hls_ratio(field: &VortexBlobField, domain_radius: f64) -> Result<f64> {
    hls_ratio_with(field, domain_radius, domain_radius / 200.0, VelocityMethod::default())
}

pub fn hls_ratio_with(field: &VortexBlobField, domain_radius: f64, spacing: f64, method: VelocityMethod) -> Result<f64> {
    let mass = l1_norm(field);
    if mass == 0.0 {
        return Err(Error::Undefined("zero vorticity"));
    }
    let grid = Grid::covering_ball(Vec2::ZERO, domain_radius, spacing)?;
    let speed = SampledScalarField::speed(field, grid, method)?;
    Ok(m2_seminorm(&speed, domain_radius)? / mass)
}

/// ℒ²({x ∈ B_r(0) : |u − u_ref| > γ}) by counting cells.
pub fn local_measure_distance(u: &SampledScalarField, u_ref: &SampledScalarField, gamma: f64, r: f64) -> Result<f64> {
    if !u.grid.same_layout(&u_ref.grid) {
        return Err(Error::GridMismatch("fields are sampled on different grids".into()));
    }
    if !(gamma > 0.0) || !(r > 0.0) {
        return Err(Error::param("gamma", "gamma and r must be positive"));
    }
    let count = u.in_ball(r).filter(|&(k, v)| (v - u_ref.values[k]).abs() > gamma).count();
    Ok(count as f64 * u.grid.cell_area())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_grid(r: f64, h: f64) -> Grid {
        Grid::covering_ball(Vec2::ZERO, r, h).unwrap()
    }

    #[test]
    fn indicator_of_the_unit_disk() {
        let f = SampledScalarField::from_fn(ball_grid(1.5, 0.005), |x| if x.norm() < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let m = m2_seminorm_detail(&f, 1.5).unwrap();
        assert!((m.value - std::f64::consts::PI.sqrt()).abs() < 0.01 * m.value, "{m:?}");
        assert_eq!(m.level, 1.0);
        assert_eq!(m.power, m.value * m.value);
    }

    #[test]
    fn ties_count_as_one_level() {
        let g = ball_grid(1.0, 0.05);
        let f = SampledScalarField::from_fn(g, |_| 2.0).unwrap();
        let inside = g.points_in_ball(Vec2::ZERO, 1.0).len();
        let m = m2_seminorm_detail(&f, 1.0).unwrap();
        assert_eq!(m.area, inside as f64 * g.cell_area());
        assert_eq!(m.value, 2.0 * m.area.sqrt());
    }

    #[test]
    fn uncovered_ball_is_an_error() {
        let f = SampledScalarField::from_fn(ball_grid(1.0, 0.1), |_| 1.0).unwrap();
        assert!(m2_seminorm(&f, 2.0).is_err());
        assert!(SampledScalarField::new(ball_grid(1.0, 0.1), vec![0.0; 3]).is_err());
        assert!(SampledScalarField::from_fn(ball_grid(1.0, 0.1), |_| f64::NAN).is_err());
    }
}
