use std::collections::HashMap;

use super::labels::Labels;
use super::map::FlowMap;
use crate::field::InitialVorticitySpec;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct Pushforward {
    /// ω(t, x) = ω⁰(X(0, t, x)).
    pub values: Vec<f64>,
    /// Set for query points whose backward image left the region covered
    /// by the flow's labels; their values are extrapolations.
    pub outside: Vec<bool>,
}

/// Lagrangian vorticity at time t: the initial profile evaluated at the
/// backward image of each query point.
pub fn pushforward_vorticity(omega0: &InitialVorticitySpec, flow: &FlowMap, t: f64, query: &[Vec2]) -> Result<Pushforward> {
    omega0.validate()?;
    let back = flow.transport(query, t, 0.0)?;
    Ok(pushforward_from_images(omega0, flow, &back))
}

fn pushforward_from_images(omega0: &InitialVorticitySpec, flow: &FlowMap, back: &[Vec2]) -> Pushforward {
    let cover = flow.labels().coverage_box();
    let outside = back
        .iter()
        .map(|p| match cover {
            Some((lo, hi)) => p.x1 < lo.x1 || p.x2 < lo.x2 || p.x1 > hi.x1 || p.x2 > hi.x2,
            None => true,
        })
        .collect();
    Pushforward {
        values: back.iter().map(|&p| omega0.eval(p)).collect(),
        outside,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compressibility {
    /// Largest ratio of displaced-label count to label count over the
    /// coarse cells: an estimate of the compressibility constant L.
    pub value: f64,
    /// Smallest such ratio.
    pub min_ratio: f64,
    pub labels_per_cell: usize,
    pub cells: usize,
    /// Set when cells hold fewer than 256 labels, where counting noise
    /// exceeds a few percent.
    pub variance_warning: bool,
}

/// Default coarse-cell side, in labels.
pub const COMPRESSIBILITY_BLOCK: usize = 32;

/// Compressibility of X(t_to, t_from, ·) by counting: labels are placed at
/// time t_from on their grid, moved to t_to, and counted in coarse cells of
/// `COMPRESSIBILITY_BLOCK²` grid cells.
pub fn compressibility_estimate(flow: &FlowMap, t_from: f64, t_to: f64) -> Result<Compressibility> {
    compressibility_estimate_with(flow, t_from, t_to, COMPRESSIBILITY_BLOCK)
}

pub fn compressibility_estimate_with(flow: &FlowMap, t_from: f64, t_to: f64, block: usize) -> Result<Compressibility> {
    if block == 0 {
        return Err(Error::param("block", "must be positive"));
    }
    let lg = flow.labels().require_grid()?;
    let moved = flow.transport(flow.labels().points(), t_from, t_to)?;
    let g = lg.grid;
    // Coarse cells fully populated by labels.
    let mut population: HashMap<(usize, usize), usize> = HashMap::new();
    for &(i, j) in &lg.cells {
        *population.entry((i / block, j / block)).or_default() += 1;
    }
    let per_cell = block * block;
    let mut counts: HashMap<(usize, usize), usize> = population
        .iter()
        .filter(|(_, &n)| n == per_cell)
        .map(|(&k, _)| (k, 0))
        .collect();
    if counts.is_empty() {
        return Err(Error::param(
            "labels",
            format!("no coarse cell of {block}×{block} labels is fully populated"),
        ));
    }
    for p in &moved {
        if let Some((i, j)) = g.locate(*p) {
            if let Some(c) = counts.get_mut(&(i / block, j / block)) {
                *c += 1;
            }
        }
    }
    let ratios = counts.values().map(|&c| c as f64 / per_cell as f64);
    let value = ratios.clone().fold(0.0, f64::max);
    let min_ratio = ratios.fold(f64::INFINITY, f64::min);
    Ok(Compressibility {
        value,
        min_ratio,
        labels_per_cell: per_cell,
        cells: counts.len(),
        variance_warning: per_cell < 256,
    })
}

/// ℒ²(B_r ∩ {|X_A(s,t,·) − X_B(s,t,·)| > γ}) by counting labels.
pub fn flow_measure_distance(flow_a: &FlowMap, flow_b: &FlowMap, gamma: f64, r: f64, s: f64, t: f64) -> Result<f64> {
    if !flow_a.labels().same_grid(flow_b.labels()) {
        return Err(Error::GridMismatch("flows are sampled on different label grids".into()));
    }
    let xa = flow_a.two_time(s, t)?;
    let xb = flow_b.two_time(s, t)?;
    measure_distance_from_positions(flow_a, &xa, &xb, gamma, r)
}

/// As [`flow_measure_distance`] for positions already computed on the
/// labels of `flow`.
pub fn measure_distance_from_positions(flow: &FlowMap, xa: &[Vec2], xb: &[Vec2], gamma: f64, r: f64) -> Result<f64> {
    measure_distance_on(flow.labels(), xa, xb, gamma, r)
}

/// As [`flow_measure_distance`] for positions of the given grid labels.
pub fn measure_distance_on(labels: &Labels, xa: &[Vec2], xb: &[Vec2], gamma: f64, r: f64) -> Result<f64> {
    if !(gamma > 0.0) || !(r > 0.0) {
        return Err(Error::param("gamma", "gamma and r must be positive"));
    }
    let lg = labels.require_grid()?;
    let points = labels.points();
    if xa.len() != points.len() || xb.len() != points.len() {
        return Err(Error::GridMismatch("position count differs from label count".into()));
    }
    let count = points
        .iter()
        .zip(xa.iter().zip(xb))
        .filter(|(x, (a, b))| x.norm_sq() <= r * r && (**a - **b).norm() > gamma)
        .count();
    Ok(count as f64 * lg.grid.cell_area())
}
