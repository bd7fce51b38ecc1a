use crate::grid::Grid;
use crate::{Error, Result, Vec2};

/// Initial points of a flow map. Labels taken from a uniform grid keep
/// their cell indices so that area-based metrics can weight them.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    points: Vec<Vec2>,
    grid: Option<LabelGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub grid: Grid,
    /// Cell (i, j) of each label.
    pub cells: Vec<(usize, usize)>,
}

impl Labels {
    pub fn scattered(points: Vec<Vec2>) -> Self {
        Self { points, grid: None }
    }

    /// Every cell centre of `grid`.
    pub fn grid(grid: Grid) -> Self {
        let mut cells = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                cells.push((i, j));
            }
        }
        Self::from_cells(grid, cells)
    }

    /// The cell centres of `grid` inside the closed ball B_radius(center).
    pub fn grid_in_ball(grid: Grid, center: Vec2, radius: f64) -> Self {
        let mut cells = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if (grid.center(i, j) - center).norm_sq() <= radius * radius {
                    cells.push((i, j));
                }
            }
        }
        Self::from_cells(grid, cells)
    }

    fn from_cells(grid: Grid, cells: Vec<(usize, usize)>) -> Self {
        Self {
            points: cells.iter().map(|&(i, j)| grid.center(i, j)).collect(),
            grid: Some(LabelGrid { grid, cells }),
        }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn label_grid(&self) -> Option<&LabelGrid> {
        self.grid.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn require_grid(&self) -> Result<&LabelGrid> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::GridMismatch("labels do not form a uniform grid".into()))
    }

    pub fn same_grid(&self, other: &Labels) -> bool {
        match (&self.grid, &other.grid) {
            (Some(a), Some(b)) => a.grid.same_layout(&b.grid) && a.cells == b.cells,
            _ => false,
        }
    }

    /// Axis-aligned box covered by the labels.
    pub fn coverage_box(&self) -> Option<(Vec2, Vec2)> {
        if let Some(g) = &self.grid {
            let g = g.grid;
            let hi = g.corner + Vec2::new(g.nx as f64 * g.spacing, g.ny as f64 * g.spacing);
            return Some((g.corner, hi));
        }
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Vec2::new(lo.x1.min(p.x1), lo.x2.min(p.x2)),
                Vec2::new(hi.x1.max(p.x1), hi.x2.max(p.x2)),
            )
        }))
    }
}

impl From<Vec<Vec2>> for Labels {
    fn from(points: Vec<Vec2>) -> Self {
        Self::scattered(points)
    }
}

impl From<Grid> for Labels {
    fn from(grid: Grid) -> Self {
        Self::grid(grid)
    }
}
