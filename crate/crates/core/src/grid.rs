//! Uniform cell-centred grids used for quadrature, label sets and sampled
//! fields.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec2};

/// A uniform grid of `nx × ny` square cells of side `spacing`, with
/// `corner` the lower-left corner of cell (0, 0). Samples live at cell
/// centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub corner: Vec2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(corner: Vec2, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::param("grid", "empty grid"));
        }
        if !corner.is_finite() {
            return Err(Error::NonFinite("grid corner"));
        }
        Ok(Self { corner, spacing, nx, ny })
    }

    /// Smallest grid of the given spacing, centred on `center`, whose cells
    /// cover the square circumscribing the ball B_radius(center).
    pub fn covering_ball(center: Vec2, radius: f64, spacing: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param("radius", format!("must be positive, got {radius}")));
        }
        let n = (2.0 * radius / spacing).ceil().max(1.0) as usize;
        let half = 0.5 * n as f64 * spacing;
        Self::new(center - Vec2::new(half, half), spacing, n, n)
    }

    /// Grid covering the axis-aligned box [lo, hi].
    pub fn covering_box(lo: Vec2, hi: Vec2, spacing: f64) -> Result<Self> {
        let nx = ((hi.x1 - lo.x1) / spacing).ceil().max(1.0) as usize;
        let ny = ((hi.x2 - lo.x2) / spacing).ceil().max(1.0) as usize;
        let mid = (lo + hi) * 0.5;
        let corner = mid - Vec2::new(0.5 * nx as f64 * spacing, 0.5 * ny as f64 * spacing);
        Self::new(corner, spacing, nx, ny)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        self.corner + Vec2::new((i as f64 + 0.5) * self.spacing, (j as f64 + 0.5) * self.spacing)
    }

    /// Cell centres in row-major order (x₁ fastest).
    pub fn points(&self) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(self.center(i, j));
            }
        }
        out
    }

    /// Cell centres lying in the closed ball B_radius(center).
    pub fn points_in_ball(&self, center: Vec2, radius: f64) -> Vec<Vec2> {
        let r2 = radius * radius;
        self.points()
            .into_iter()
            .filter(|p| (*p - center).norm_sq() <= r2)
            .collect()
    }

    /// Index of the cell containing `p`, if any.
    pub fn locate(&self, p: Vec2) -> Option<(usize, usize)> {
        let u = (p.x1 - self.corner.x1) / self.spacing;
        let v = (p.x2 - self.corner.x2) / self.spacing;
        if u < 0.0 || v < 0.0 || !u.is_finite() || !v.is_finite() {
            return None;
        }
        let (i, j) = (u as usize, v as usize);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    /// Same grid with every cell split into `factor × factor` sub-cells.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            corner: self.corner,
            spacing: self.spacing / factor as f64,
            nx: self.nx * factor,
            ny: self.ny * factor,
        }
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && (self.corner - other.corner).norm() <= 1e-12 * self.spacing.max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_ball_is_centred() {
        let g = Grid::covering_ball(Vec2::new(1.0, -1.0), 1.0, 0.1).unwrap();
        assert_eq!(g.nx, 20);
        let pts = g.points();
        let mean = pts.iter().fold(Vec2::ZERO, |a, &p| a + p) / pts.len() as f64;
        assert!((mean - Vec2::new(1.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn locate_roundtrips_centres() {
        let g = Grid::new(Vec2::new(-1.0, -2.0), 0.25, 8, 16).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(g.locate(g.center(i, j)), Some((i, j)));
            }
        }
        assert_eq!(g.locate(Vec2::new(5.0, 0.0)), None);
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(Grid::new(Vec2::ZERO, 0.0, 2, 2).is_err());
        assert!(Grid::new(Vec2::ZERO, f64::NAN, 2, 2).is_err());
    }
}
