use std::io::Write;

use serde::{Deserialize, Serialize};

use super::least_squares_slope;
use crate::io::write_table;
use crate::kernel::{kernel_translation_norm, QuadratureSpec};
use crate::{Error, Result, Vec2};

/// Relative quadrature error above which a fit is not trusted.
pub const INCONCLUSIVE_FRACTION: f64 = 0.1;
/// Accepted window around α = 2/p − 1.
pub const SLOPE_BELOW: f64 = 0.05;
pub const SLOPE_ABOVE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePoint {
    pub p: f64,
    pub h: f64,
    pub value: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub p: f64,
    pub alpha: f64,
    pub slope: f64,
    /// Largest error_estimate / value over the h values.
    pub max_relative_error: f64,
    pub inconclusive: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub rows: Vec<SlopeRow>,
    pub points: Vec<SlopePoint>,
}

impl SlopeReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn write_slopes(&self, out: impl Write) -> Result<()> {
        write_table(out, "kernel_slopes", &[], &self.rows)
    }

    pub fn write_points(&self, out: impl Write) -> Result<()> {
        write_table(out, "kernel_points", &[], &self.points)
    }
}

/// Fits log ‖τ_h K − K‖_{L^p(B_R)} against log |h| for each p, with
/// h = (|h|, 0). Duplicate |h| are dropped.
pub fn run_kernel_scaling_experiment(p_list: &[f64], h_list: &[f64], quad: &QuadratureSpec) -> Result<SlopeReport> {
    if p_list.is_empty() {
        return Err(Error::param("p_list", "is empty"));
    }
    let mut hs: Vec<f64> = h_list.iter().map(|h| h.abs()).collect();
    if hs.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::param("h_list", "entries must be nonzero and finite"));
    }
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    if hs.len() < 2 {
        return Err(Error::param("h_list", "a slope needs at least two distinct h"));
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &p in p_list {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut max_relative_error: f64 = 0.0;
        for &h in &hs {
            let n = kernel_translation_norm(Vec2::new(h, 0.0), p, quad)?;
            max_relative_error = max_relative_error.max(n.error_estimate / n.value);
            xs.push(h.ln());
            ys.push(n.value.ln());
            points.push(SlopePoint {
                p,
                h,
                value: n.value,
                error_estimate: n.error_estimate,
            });
        }
        let alpha = 2.0 / p - 1.0;
        let slope = least_squares_slope(&xs, &ys)?;
        let inconclusive = !(max_relative_error <= INCONCLUSIVE_FRACTION);
        rows.push(SlopeRow {
            p,
            alpha,
            slope,
            max_relative_error,
            inconclusive,
            passed: !inconclusive && slope >= alpha - SLOPE_BELOW && slope <= alpha + SLOPE_ABOVE,
        });
    }
    Ok(SlopeReport { rows, points })
}
