//! Residuals of the weak formulations on computed runs.
//!
//! ω-integrals use the particles as atoms (Σ Γᵢ δ_{xᵢ}); v-integrals use a
//! midpoint grid over the support of φ; time integrals use the trapezoid
//! rule on the run's times. Each residual carries an error estimate made of
//! three parts: trapezoid on every node against every other node, grid of
//! spacing h against its 2h sub-lattice, and the plain kernel against the
//! ε-desingularized kernel in the pair sums.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::BlobRun;
use super::test_function::{ScalarTestFunction, Support, VectorTestFunction};
use crate::field::{
    pair_kernel, InitialVorticitySpec, MollifierProfile, PairColumns, VelocityEvaluator, VelocityMethod, VortexBlobField,
};
use crate::flow::{Cohort, FlowMap};
use crate::grid::Grid;
use crate::kernel::INV_2PI;
use crate::sum::pairwise;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    SymmetrizedVorticity,
    SymmetrizedVelocity,
    Renormalized,
    WeakVelocity,
}

impl Formulation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SymmetrizedVorticity => "symmetrized_vorticity",
            Self::SymmetrizedVelocity => "symmetrized_velocity",
            Self::Renormalized => "renormalized",
            Self::WeakVelocity => "weak_velocity",
        }
    }
}

/// Signed contributions; the residual is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermBreakdown {
    /// ∫∫ ∂ₜφ against the solution.
    pub time: f64,
    /// The nonlinear term with the sign it has in the formulation.
    pub nonlinear: f64,
    /// ∫ φ(0) against the initial datum.
    pub initial: f64,
    /// −∫ φ(T) against the solution at T. Zero when φ(T) = 0.
    pub final_time: f64,
}

impl TermBreakdown {
    pub fn total(&self) -> f64 {
        self.time + self.nonlinear + self.initial + self.final_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub formulation: Formulation,
    pub residual: f64,
    pub quadrature_error_estimate: f64,
    /// A priori bound on the summed magnitudes of the terms, from the sup
    /// norms and Lipschitz constants of φ and the size of the solution.
    /// The natural unit for the residual.
    pub scale: f64,
    pub terms: TermBreakdown,
}

impl ResidualReport {
    fn new(formulation: Formulation, terms: TermBreakdown, estimate: f64, scale: f64) -> Self {
        Self {
            formulation,
            residual: terms.total(),
            quadrature_error_estimate: ESTIMATE_SAFETY * estimate,
            scale,
            terms,
        }
    }

    /// |residual| / scale; 0 for the zero solution.
    pub fn relative(&self) -> f64 {
        if self.residual == 0.0 {
            0.0
        } else if self.scale > 0.0 {
            self.residual.abs() / self.scale
        } else {
            f64::INFINITY
        }
    }
}

/// Bounded C¹ nonlinearities β for the renormalized formulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Constant { value: f64 },
    Arctan,
    /// The identity on [−level, level], bent with continuous slope to the
    /// constant ±1.5·level beyond 2·level.
    SmoothClip { level: f64 },
    /// β(z) = z. Unbounded, so not admissible in the renormalized
    /// formulation; gives the plain transport residual for comparison.
    Identity,
}

impl Nonlinearity {
    pub fn beta(&self, z: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Arctan => z.atan(),
            Self::SmoothClip { level } => {
                let a = z.abs();
                let y = if a <= level {
                    a
                } else if a < 2.0 * level {
                    let e = a - level;
                    a - e * e / (2.0 * level)
                } else {
                    1.5 * level
                };
                y.copysign(z)
            }
            Self::Identity => z,
        }
    }

    pub fn beta_prime(&self, z: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Arctan => 1.0 / (1.0 + z * z),
            Self::SmoothClip { level } => {
                let a = z.abs();
                if a <= level {
                    1.0
                } else if a < 2.0 * level {
                    1.0 - (a - level) / level
                } else {
                    0.0
                }
            }
            Self::Identity => 1.0,
        }
    }

    /// sup |β|; infinite for `Identity`.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            Self::Constant { value } => value.abs(),
            Self::Arctan => std::f64::consts::FRAC_PI_2,
            Self::SmoothClip { level } => 1.5 * level,
            Self::Identity => f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_abs().is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { value } if !value.is_finite() => Err(Error::param("beta", "constant must be finite")),
            Self::SmoothClip { level } if !(level > 0.0 && level.is_finite()) => {
                Err(Error::param("beta", "clip level must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Quadrature settings. Unset fields are chosen from the run and φ.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualOptions {
    /// Grid spacing for v-integrals. Default min(ε/2, R/32), or R/40 for
    /// the renormalized residual.
    pub grid_spacing: Option<f64>,
    /// Cap on the number of time nodes (thinning the run evenly). Default
    /// all nodes, or 11 for the renormalized residual, whose backward
    /// trajectories dominate the cost.
    pub max_time_nodes: Option<usize>,
}

/// Relative change allowed in ∫|v|² between the 2h and h grids.
pub const ENERGY_GUARD: f64 = 0.05;

/// Multiplier on the summed error indicators, as in grid convergence
/// studies; covers what the indicators leave out (flow-integration and
/// treecode error).
pub const ESTIMATE_SAFETY: f64 = 1.25;

/// Symmetrized vorticity residual
/// ∫∫∂ₜφ ω − ∫∫∫H_φ ω ω + ∫φ(0)ω⁰ (− ∫φ(T)ω(T) when φ(T) ≠ 0).
pub fn symmetrized_vorticity_residual(
    run: &BlobRun,
    phi: &impl ScalarTestFunction,
    omega0: &VortexBlobField,
) -> Result<ResidualReport> {
    symmetrized_vorticity_residual_with(run, phi, omega0, &ResidualOptions::default())
}

pub fn symmetrized_vorticity_residual_with(
    run: &BlobRun,
    phi: &impl ScalarTestFunction,
    omega0: &VortexBlobField,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    let support = checked_support(phi.support())?;
    let run = thin(run, opts.max_time_nodes);
    let times = run.times();
    let t_end = run.t_end();
    let kernel = pair_kernel();
    let mut time_vals = Vec::with_capacity(times.len());
    let mut pair_vals = Vec::with_capacity(times.len());
    let mut pair_smooth = Vec::with_capacity(times.len());
    let mut scale_vals = Vec::with_capacity(times.len());
    for (k, field) in run.fields().iter().enumerate() {
        let t = times[k];
        let mass = l1_mass(field);
        time_vals.push(atomic(field, |x| phi.time_derivative(t, x)));
        let p = pair_sum(field, support, |x| phi.gradient(t, x), true, field.blob_scale(), kernel);
        pair_vals.push(p.plain);
        pair_smooth.push(p.smoothed);
        scale_vals.push(phi.sup_time_derivative() * mass + phi.lip_gradient(t) / (4.0 * std::f64::consts::PI) * mass * mass);
    }
    let last = run.fields().last().unwrap();
    let terms = TermBreakdown {
        time: trapezoid(times, &time_vals),
        nonlinear: -trapezoid(times, &pair_vals),
        initial: atomic(omega0, |x| phi.value(0.0, x)),
        final_time: -atomic(last, |x| phi.value(t_end, x)),
    };
    let desingularization: Vec<f64> = pair_vals.iter().zip(&pair_smooth).map(|(a, b)| (a - b).abs()).collect();
    let estimate = richardson(times, &time_vals) + richardson(times, &pair_vals) + trapezoid(times, &desingularization);
    let scale = trapezoid(times, &scale_vals)
        + l1_mass(omega0) * phi.sup_abs(0.0)
        + l1_mass(last) * phi.sup_abs(t_end);
    Ok(ResidualReport::new(Formulation::SymmetrizedVorticity, terms, estimate, scale))
}

/// Symmetrized velocity residual
/// ∫∫∂ₜφ·v − ∫∫∫H̄_φ ω ω + ∫φ(0)·v⁰ (− ∫φ(T)·v(T) when φ(T) ≠ 0), with v
/// the blob velocity of the run and v⁰ that of its first field.
pub fn symmetrized_velocity_residual(run: &BlobRun, phi: &impl VectorTestFunction) -> Result<ResidualReport> {
    symmetrized_velocity_residual_with(run, phi, &ResidualOptions::default())
}

pub fn symmetrized_velocity_residual_with(
    run: &BlobRun,
    phi: &impl VectorTestFunction,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    let support = checked_support(phi.support())?;
    let run = thin(run, opts.max_time_nodes);
    let times = run.times();
    let t_end = run.t_end();
    let grid = SupportGrid::new(support, velocity_spacing(&run, support, opts))?;
    let kernel = pair_kernel();
    let n = times.len();
    let mut time_vals = Vec::with_capacity(n);
    let mut time_grid_err = Vec::with_capacity(n);
    let mut pair_vals = Vec::with_capacity(n);
    let mut pair_smooth = Vec::with_capacity(n);
    let mut scale_vals = Vec::with_capacity(n);
    let mut first_last = [(0.0, 0.0, 0.0); 2];
    for (k, field) in run.fields().iter().enumerate() {
        let t = times[k];
        let v = run.evaluator(k)?.eval(&grid.points);
        let (fine, coarse) = grid.integrate(|i| phi.time_derivative(t, grid.points[i]).dot(v[i]));
        time_vals.push(fine);
        time_grid_err.push((fine - coarse).abs());
        let p = pair_sum(field, support, |x| phi.value(t, x), false, SQRT_2 * field.blob_scale(), kernel);
        pair_vals.push(p.plain);
        pair_smooth.push(p.smoothed);
        let (abs_v, _) = grid.integrate(|i| v[i].norm());
        let mass = l1_mass(field);
        scale_vals.push(phi.sup_time_derivative() * abs_v + phi.lip(t) / (4.0 * std::f64::consts::PI) * mass * mass);
        if k == 0 || k == n - 1 {
            let (fine, coarse) = grid.integrate(|i| phi.value(t, grid.points[i]).dot(v[i]));
            first_last[(k == n - 1) as usize] = (fine, (fine - coarse).abs(), abs_v);
        }
    }
    let terms = TermBreakdown {
        time: trapezoid(times, &time_vals),
        nonlinear: -trapezoid(times, &pair_vals),
        initial: first_last[0].0,
        final_time: -first_last[1].0,
    };
    let estimate = richardson(times, &time_vals)
        + trapezoid(times, &time_grid_err)
        + richardson(times, &pair_vals)
        + (trapezoid(times, &pair_vals) - trapezoid(times, &pair_smooth)).abs()
        + first_last[0].1
        + first_last[1].1
        + smoothing_error(&run, phi, &grid)?;
    let scale =
        trapezoid(times, &scale_vals) + phi.sup_abs(0.0) * first_last[0].2 + phi.sup_abs(t_end) * first_last[1].2;
    Ok(ResidualReport::new(Formulation::SymmetrizedVelocity, terms, estimate, scale))
}

/// The linear terms see the blob-smoothed vorticity (∫φ·v = ∫ψ ω_ε) while
/// the pair sum sees atoms. With a known stream function the atomic linear
/// terms are computed directly; otherwise the linear terms are recomputed
/// at blob scale ε/2 and the difference extrapolated assuming O(ε²).
fn smoothing_error(run: &BlobRun, phi: &impl VectorTestFunction, grid: &SupportGrid) -> Result<f64> {
    let run = thin(run, Some(11));
    let times = run.times();
    let last = times.len() - 1;
    let linear = |vals: &[f64], ends: [f64; 2]| trapezoid(times, vals) + ends[0] - ends[1];
    let grid_linear = |factor: f64| -> Result<f64> {
        let mut vals = Vec::with_capacity(times.len());
        let mut ends = [0.0; 2];
        for (k, field) in run.fields().iter().enumerate() {
            let t = times[k];
            let rescaled = VortexBlobField::new(
                field.positions().to_vec(),
                field.weights().to_vec(),
                factor * field.blob_scale(),
                *field.mollifier(),
            )?;
            let v = VelocityEvaluator::new(rescaled, run.method())?.eval(&grid.points);
            vals.push(grid.integrate(|i| phi.time_derivative(t, grid.points[i]).dot(v[i])).0);
            if k == 0 || k == last {
                ends[(k > 0) as usize] = grid.integrate(|i| phi.value(t, grid.points[i]).dot(v[i])).0;
            }
        }
        Ok(linear(&vals, ends))
    };
    let smoothed = grid_linear(1.0)?;
    if phi.stream(0.0, grid.points.first().copied().unwrap_or(Vec2::ZERO)).is_some() {
        let mut vals = Vec::with_capacity(times.len());
        let mut ends = [0.0; 2];
        for (k, field) in run.fields().iter().enumerate() {
            let t = times[k];
            vals.push(atomic(field, |x| phi.stream(t, x).map_or(0.0, |s| s.1)));
            if k == 0 || k == last {
                ends[(k > 0) as usize] = atomic(field, |x| phi.stream(t, x).map_or(0.0, |s| s.0));
            }
        }
        return Ok((smoothed - linear(&vals, ends)).abs());
    }
    Ok((smoothed - grid_linear(0.5)?).abs() * 4.0 / 3.0)
}

/// Weak velocity residual ∫∫∂ₜφ·v + ∇φ:(v⊗v) + ∫φ(0)·v⁰ (− ∫φ(T)·v(T)).
/// Refuses runs whose velocity fails the local energy guard on supp φ.
pub fn weak_velocity_residual(run: &BlobRun, phi: &impl VectorTestFunction) -> Result<ResidualReport> {
    weak_velocity_residual_with(run, phi, &ResidualOptions::default())
}

pub fn weak_velocity_residual_with(
    run: &BlobRun,
    phi: &impl VectorTestFunction,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    let support = checked_support(phi.support())?;
    let run = thin(run, opts.max_time_nodes);
    let times = run.times();
    let t_end = run.t_end();
    let grid = SupportGrid::new(support, velocity_spacing(&run, support, opts))?;
    let n = times.len();
    let mut time_vals = Vec::with_capacity(n);
    let mut flux_vals = Vec::with_capacity(n);
    let mut grid_err = Vec::with_capacity(n);
    let mut scale_vals = Vec::with_capacity(n);
    let mut first_last = [(0.0, 0.0, 0.0); 2];
    for k in 0..n {
        let t = times[k];
        let v = run.evaluator(k)?.eval(&grid.points);
        let energy = grid.energy_guard(&v, t)?;
        let (a, ac) = grid.integrate(|i| phi.time_derivative(t, grid.points[i]).dot(v[i]));
        let (b, bc) = grid.integrate(|i| flux(&phi.jacobian(t, grid.points[i]), v[i]));
        time_vals.push(a);
        flux_vals.push(b);
        grid_err.push((a - ac).abs() + (b - bc).abs());
        let (abs_v, _) = grid.integrate(|i| v[i].norm());
        scale_vals.push(phi.sup_time_derivative() * abs_v + phi.lip(t) * energy);
        if k == 0 || k == n - 1 {
            let (fine, coarse) = grid.integrate(|i| phi.value(t, grid.points[i]).dot(v[i]));
            first_last[(k == n - 1) as usize] = (fine, (fine - coarse).abs(), abs_v);
        }
    }
    let terms = TermBreakdown {
        time: trapezoid(times, &time_vals),
        nonlinear: trapezoid(times, &flux_vals),
        initial: first_last[0].0,
        final_time: -first_last[1].0,
    };
    let estimate = richardson(times, &time_vals)
        + richardson(times, &flux_vals)
        + trapezoid(times, &grid_err)
        + first_last[0].1
        + first_last[1].1;
    let scale =
        trapezoid(times, &scale_vals) + phi.sup_abs(0.0) * first_last[0].2 + phi.sup_abs(t_end) * first_last[1].2;
    Ok(ResidualReport::new(Formulation::WeakVelocity, terms, estimate, scale))
}

/// Renormalized residual ∫∫(∂ₜφ + ∇φ·v) β(ω) + ∫φ(0)β(ω⁰) (− ∫φ(T)β(ω(T))),
/// with ω(t, x) = ω⁰(X(0, t, x)) from backward trajectories of the flow.
pub fn renormalized_residual(
    flow: &FlowMap,
    omega0: &InitialVorticitySpec,
    beta: Nonlinearity,
    phi: &impl ScalarTestFunction,
) -> Result<ResidualReport> {
    renormalized_residual_with(flow, omega0, beta, phi, &ResidualOptions::default())
}

pub fn renormalized_residual_with(
    flow: &FlowMap,
    omega0: &InitialVorticitySpec,
    beta: Nonlinearity,
    phi: &impl ScalarTestFunction,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    beta.validate()?;
    omega0.validate()?;
    let support = checked_support(phi.support())?;
    let spacing = opts.grid_spacing.unwrap_or(support.radius / 40.0);
    let grid = SupportGrid::new(support, spacing)?;
    let times = thin_times(flow.times(), opts.max_time_nodes.or(Some(11)));
    let t_end = *times.last().unwrap();
    let cohorts: Vec<Cohort> = times[1..]
        .iter()
        .map(|&t| Cohort {
            start: t,
            points: grid.points.clone(),
            stops: vec![0.0],
        })
        .collect();
    let mut images = vec![grid.points.clone()];
    images.extend(flow.sweep(&cohorts)?.into_iter().map(|mut c| c.pop().unwrap()));
    let n = times.len();
    let mut time_vals = Vec::with_capacity(n);
    let mut flux_vals = Vec::with_capacity(n);
    let mut grid_err = Vec::with_capacity(n);
    let mut scale_vals = Vec::with_capacity(n);
    let mut first_last = [(0.0, 0.0); 2];
    let mut sup_b: f64 = 0.0;
    let area = grid.area();
    for (k, back) in images.iter().enumerate() {
        let t = times[k];
        let b: Vec<f64> = back.iter().map(|&y| beta.beta(omega0.eval(y))).collect();
        sup_b = b.iter().fold(sup_b, |m, x| m.max(x.abs()));
        let v = flow.history().velocity_at(t, &grid.points)?;
        let (a, ac) = grid.integrate(|i| phi.time_derivative(t, grid.points[i]) * b[i]);
        let (f, fc) = grid.integrate(|i| phi.gradient(t, grid.points[i]).dot(v[i]) * b[i]);
        time_vals.push(a);
        flux_vals.push(f);
        grid_err.push((a - ac).abs() + (f - fc).abs());
        let (abs_v, _) = grid.integrate(|i| v[i].norm());
        scale_vals.push(phi.sup_time_derivative() * area + phi.lip(t) * abs_v);
        if k == 0 || k == n - 1 {
            let (fine, coarse) = grid.integrate(|i| phi.value(t, grid.points[i]) * b[i]);
            first_last[(k == n - 1) as usize] = (fine, (fine - coarse).abs());
        }
    }
    let terms = TermBreakdown {
        time: trapezoid(&times, &time_vals),
        nonlinear: trapezoid(&times, &flux_vals),
        initial: first_last[0].0,
        final_time: -first_last[1].0,
    };
    let estimate = richardson(&times, &time_vals)
        + richardson(&times, &flux_vals)
        + trapezoid(&times, &grid_err)
        + first_last[0].1
        + first_last[1].1;
    let sup_beta = if beta.is_bounded() { beta.sup_abs() } else { sup_b };
    let scale = sup_beta * (trapezoid(&times, &scale_vals) + (phi.sup_abs(0.0) + phi.sup_abs(t_end)) * area);
    Ok(ResidualReport::new(Formulation::Renormalized, terms, estimate, scale))
}

/// The two sides of the symmetrization identity for one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityGap {
    /// Σᵢ Σⱼ Γᵢ Γⱼ H̄_φ(xᵢ, xⱼ).
    pub pair_side: f64,
    /// ∫ ∇φ : (v ⊗ v) dx, extrapolated to zero blob scale.
    pub grid_side: f64,
    /// Grid side at the field's own blob scale minus the extrapolated value.
    pub blob_correction: f64,
    /// |pair_side + grid_side|.
    pub gap: f64,
    /// gap / max(|pair_side|, |grid_side|); 0 when both vanish.
    pub relative: f64,
    /// Lip(φ)/(4π)·(Σ|Γᵢ|)², an a-priori bound on either side.
    pub scale: f64,
    /// gap / scale; 0 when the gap vanishes.
    pub relative_to_scale: f64,
}

/// |Σᵢ Σⱼ Γᵢ Γⱼ H̄_φ(xᵢ, xⱼ) + ∫∇φ:(v⊗v)|, which vanishes exactly for the
/// continuous problem. Time-independent use: φ is taken at t = 0.
///
/// The particles are read as a quadrature of a smooth vorticity. The blob
/// velocity carries an O(ε²) bias, removed by evaluating the grid side at
/// ε and √2ε and extrapolating.
pub fn sym_weak_identity_gap(omega: &VortexBlobField, phi: &impl VectorTestFunction) -> Result<IdentityGap> {
    sym_weak_identity_gap_with(omega, phi, &ResidualOptions::default())
}

pub fn sym_weak_identity_gap_with(
    omega: &VortexBlobField,
    phi: &impl VectorTestFunction,
    opts: &ResidualOptions,
) -> Result<IdentityGap> {
    let support = checked_support(phi.support())?;
    let eps = omega.blob_scale();
    let spacing = opts.grid_spacing.unwrap_or((0.5 * eps).min(support.radius / 32.0));
    let grid = SupportGrid::new(support, spacing)?;
    let grid_side_at = |field: &VortexBlobField| -> Result<f64> {
        let v = VelocityEvaluator::new(field.clone(), VelocityMethod::default())?.eval(&grid.points);
        grid.energy_guard(&v, 0.0)?;
        Ok(grid.integrate(|i| flux(&phi.jacobian(0.0, grid.points[i]), v[i])).0)
    };
    let fine = grid_side_at(omega)?;
    let wide = VortexBlobField::new(
        omega.positions().to_vec(),
        omega.weights().to_vec(),
        SQRT_2 * eps,
        omega.mollifier().clone(),
    )?;
    let coarse = grid_side_at(&wide)?;
    let grid_side = 2.0 * fine - coarse;
    let pair_side = pair_sum(omega, support, |x| phi.value(0.0, x), false, SQRT_2 * eps, pair_kernel()).plain;
    let gap = (pair_side + grid_side).abs();
    let denom = pair_side.abs().max(grid_side.abs());
    let mass = l1_mass(omega);
    let scale = 0.5 * INV_2PI * phi.lip(0.0) * mass * mass;
    Ok(IdentityGap {
        pair_side,
        grid_side,
        blob_correction: fine - grid_side,
        gap,
        relative: if gap == 0.0 { 0.0 } else { gap / denom },
        scale,
        relative_to_scale: if gap == 0.0 { 0.0 } else { gap / scale },
    })
}

/// ∇φ : (v ⊗ v) = Σᵢⱼ ∂ⱼφᵢ vᵢ vⱼ.
fn flux(j: &[[f64; 2]; 2], v: Vec2) -> f64 {
    let w = [v.x1, v.x2];
    let mut s = 0.0;
    for (a, row) in j.iter().enumerate() {
        for (b, d) in row.iter().enumerate() {
            s += d * w[a] * w[b];
        }
    }
    s
}

fn checked_support(s: Support) -> Result<Support> {
    if !(s.radius > 0.0 && s.radius.is_finite() && s.center.is_finite()) {
        return Err(Error::SupportCoverage(format!(
            "test support must be a finite ball, got radius {}",
            s.radius
        )));
    }
    Ok(s)
}

fn velocity_spacing(run: &BlobRun, support: Support, opts: &ResidualOptions) -> f64 {
    opts.grid_spacing.unwrap_or_else(|| {
        let eps = run.fields()[0].blob_scale();
        (0.5 * eps).min(support.radius / 32.0)
    })
}

fn thin(run: &BlobRun, max_nodes: Option<usize>) -> BlobRun {
    match max_nodes {
        Some(m) if m >= 2 && run.times().len() > m => run.thinned((run.times().len() - 1).div_ceil(m - 1)),
        _ => run.clone(),
    }
}

fn thin_times(times: &[f64], max_nodes: Option<usize>) -> Vec<f64> {
    match max_nodes {
        Some(m) if m >= 2 && times.len() > m => {
            let stride = (times.len() - 1).div_ceil(m - 1);
            let n = times.len();
            (0..n).filter(|k| k % stride == 0 || *k == n - 1).map(|k| times[k]).collect()
        }
        _ => times.to_vec(),
    }
}

fn l1_mass(field: &VortexBlobField) -> f64 {
    let w: Vec<f64> = field.weights().iter().map(|w| w.abs()).collect();
    pairwise(&w)
}

/// Σ Γᵢ f(xᵢ).
fn atomic(field: &VortexBlobField, f: impl Fn(Vec2) -> f64 + Sync) -> f64 {
    let vals: Vec<f64> = field
        .positions()
        .par_iter()
        .zip(field.weights())
        .map(|(&x, &w)| w * f(x))
        .collect();
    pairwise(&vals)
}

fn trapezoid(times: &[f64], f: &[f64]) -> f64 {
    let terms: Vec<f64> = times
        .windows(2)
        .zip(f.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .collect();
    pairwise(&terms)
}

/// |trapezoid − Simpson| on the same nodes, Simpson taken on consecutive
/// interval pairs (unequal widths allowed) and the trapezoid on a leftover
/// last interval.
fn richardson(times: &[f64], f: &[f64]) -> f64 {
    let n = times.len();
    if n < 3 {
        return 0.0;
    }
    let mut parts = Vec::new();
    let mut k = 0;
    while k + 2 < n {
        let (h0, h1) = (times[k + 1] - times[k], times[k + 2] - times[k + 1]);
        let w = (h0 + h1) / 6.0;
        parts.push(w * ((2.0 - h1 / h0) * f[k] + (h0 + h1) * (h0 + h1) / (h0 * h1) * f[k + 1] + (2.0 - h0 / h1) * f[k + 2]));
        k += 2;
    }
    if k + 1 < n {
        parts.push(0.5 * (times[k + 1] - times[k]) * (f[k] + f[k + 1]));
    }
    (trapezoid(times, f) - pairwise(&parts)).abs()
}

struct PairSum {
    plain: f64,
    smoothed: f64,
}

/// Σ_{i≠j} Γᵢ Γⱼ (−1/4π) a(xᵢ − xⱼ)·(f(xᵢ) − f(xⱼ)) / |xᵢ − xⱼ|², with
/// a(d) = d^⊥ (`rotate`, giving H_φ for f = ∇φ) or a(d) = d (giving H̄_φ
/// for f = φ). Only pairs with a member inside the support contribute, and
/// each unordered pair is visited once. The smoothed twin weights each pair
/// by the mollifier's mass fraction at scale `smoothing`.
fn pair_sum(
    field: &VortexBlobField,
    support: Support,
    f: impl Fn(Vec2) -> Vec2 + Sync,
    rotate: bool,
    smoothing: f64,
    kernel: crate::field::PairKernelFn,
) -> PairSum {
    let pos = field.positions();
    let w = field.weights();
    let (inside, outside): (Vec<usize>, Vec<usize>) = (0..pos.len()).partition(|&i| support.contains(pos[i]));
    let order: Vec<usize> = inside.iter().chain(&outside).copied().collect();
    let xs: Vec<f64> = order.iter().map(|&i| pos[i].x1).collect();
    let ys: Vec<f64> = order.iter().map(|&i| pos[i].x2).collect();
    let ws: Vec<f64> = order.iter().map(|&i| w[i]).collect();
    let fv: Vec<Vec2> = inside.par_iter().map(|&i| f(pos[i])).collect();
    let mut fx = vec![0.0; order.len()];
    let mut fy = vec![0.0; order.len()];
    for (k, v) in fv.iter().enumerate() {
        fx[k] = v.x1;
        fy[k] = v.x2;
    }
    let eps = smoothing;
    let gaussian = field.mollifier().profile == MollifierProfile::Gaussian;
    let mollifier = *field.mollifier();
    let rows: Vec<(f64, f64)> = (0..inside.len())
        .into_par_iter()
        .map(|i| {
            let x = Vec2::new(xs[i], ys[i]);
            let fi = Vec2::new(fx[i], fy[i]);
            let cols = PairColumns {
                xs: &xs[i + 1..],
                ys: &ys[i + 1..],
                fx: &fx[i + 1..],
                fy: &fy[i + 1..],
                ws: &ws[i + 1..],
            };
            let (a, b) = if gaussian {
                kernel(x, fi, &cols, rotate, 0.5 / (eps * eps))
            } else {
                let mut a = 0.0;
                let mut b = 0.0;
                for j in 0..cols.xs.len() {
                    let d = x - Vec2::new(cols.xs[j], cols.ys[j]);
                    let r2 = d.norm_sq();
                    if r2 == 0.0 {
                        continue;
                    }
                    let ad = if rotate { d.perp() } else { d };
                    let v = cols.ws[j] * ad.dot(fi - Vec2::new(cols.fx[j], cols.fy[j])) / r2;
                    a += v;
                    b += v * mollifier.mass_fraction(r2, eps);
                }
                (a, b)
            };
            (ws[i] * a, ws[i] * b)
        })
        .collect();
    let plain: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let smoothed: Vec<f64> = rows.iter().map(|r| r.1).collect();
    // Two orderings per unordered pair, times −1/(4π).
    let c = -INV_2PI;
    PairSum {
        plain: c * pairwise(&plain),
        smoothed: c * pairwise(&smoothed),
    }
}

/// Midpoint grid on the part of a cell-centred grid inside the support
/// ball, with the cells of even index pairs marking its 2h sub-lattice.
struct SupportGrid {
    points: Vec<Vec2>,
    coarse: Vec<bool>,
    cell_area: f64,
}

impl SupportGrid {
    fn new(support: Support, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::param("grid_spacing", format!("must be positive, got {spacing}")));
        }
        let g = Grid::covering_ball(support.center, support.radius, spacing)?;
        let mut points = Vec::new();
        let mut coarse = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = g.center(i, j);
                if support.contains(p) {
                    points.push(p);
                    coarse.push(i % 2 == 0 && j % 2 == 0);
                }
            }
        }
        Ok(Self {
            points,
            coarse,
            cell_area: g.cell_area(),
        })
    }

    fn area(&self) -> f64 {
        self.points.len() as f64 * self.cell_area
    }

    /// Midpoint sums on the h grid and on its 2h sub-lattice.
    fn integrate(&self, f: impl Fn(usize) -> f64 + Sync) -> (f64, f64) {
        let vals: Vec<f64> = (0..self.points.len()).into_par_iter().map(&f).collect();
        let coarse: Vec<f64> = vals
            .iter()
            .zip(&self.coarse)
            .map(|(&v, &c)| if c { v } else { 0.0 })
            .collect();
        (pairwise(&vals) * self.cell_area, pairwise(&coarse) * 4.0 * self.cell_area)
    }

    /// ∫|v|² over the support, required finite and stable under the
    /// 2h → h refinement.
    fn energy_guard(&self, v: &[Vec2], t: f64) -> Result<f64> {
        let (fine, coarse) = self.integrate(|i| v[i].norm_sq());
        if !fine.is_finite() || !coarse.is_finite() {
            return Err(Error::InfiniteEnergy(format!("∫|v|² not finite at t = {t}")));
        }
        if (fine - coarse).abs() > ENERGY_GUARD * fine {
            return Err(Error::InfiniteEnergy(format!(
                "∫|v|² changes from {coarse:.4e} to {fine:.4e} under refinement at t = {t}"
            )));
        }
        Ok(fine)
    }
}
