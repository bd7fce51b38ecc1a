use super::config::{Coupling, FlowConfig, Integrator};
use super::history::{AnalyticField, CarrierHistory, FieldHistory, TimeSlice};
use super::labels::Labels;
use crate::field::{VelocityEvaluator, VortexBlobField};
use crate::{Error, Result, Vec2};

/// A sampled flow X(s, t, x). Forward positions X(t_k, 0, x) of the labels
/// are stored at the snapshot times t_k; any other two-time query is
/// answered by integrating the ODE in the stored field history.
#[derive(Debug, Clone)]
pub struct FlowMap {
    labels: Labels,
    times: Vec<f64>,
    states: Vec<Vec<Vec2>>,
    history: FieldHistory,
    config: FlowConfig,
    step: f64,
    bound: f64,
}

/// Points that start at `start` and are reported at each time in `stops`.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub start: f64,
    pub points: Vec<Vec2>,
    pub stops: Vec<f64>,
}

type Rhs<'a> = dyn FnMut(f64, &[Vec2]) -> Result<Vec<Vec2>> + 'a;

impl FlowMap {
    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    /// Snapshot times, starting at 0 and ending at T.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// X(t_k, 0, labels) for every snapshot k.
    pub fn states(&self) -> &[Vec<Vec2>] {
        &self.states
    }

    pub fn history(&self) -> &FieldHistory {
        &self.history
    }

    pub fn carriers(&self) -> Option<&CarrierHistory> {
        match &self.history {
            FieldHistory::Carriers(c) => Some(c),
            _ => None,
        }
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    /// Step used for backward and two-time integration.
    pub fn transport_step(&self) -> f64 {
        self.step
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let end = self.t_end();
        let tol = 1e-9 * end.max(1.0);
        if !(t >= -tol && t <= end + tol) {
            return Err(Error::TimeOutOfRange {
                time: t,
                start: 0.0,
                end,
            });
        }
        Ok(t.clamp(0.0, end))
    }

    /// X(to, from, x) for each point x: follows the trajectories through
    /// the stored field, forward or backward in time. `from == to` returns
    /// the points unchanged.
    pub fn transport(&self, points: &[Vec2], from: f64, to: f64) -> Result<Vec<Vec2>> {
        let mut out = self.transport_many(points, from, &[to])?;
        Ok(out.pop().unwrap())
    }

    /// X(s, from, x) for every s in `stops`, in the order given, with one
    /// sweep per direction.
    pub fn transport_many(&self, points: &[Vec2], from: f64, stops: &[f64]) -> Result<Vec<Vec<Vec2>>> {
        let cohort = Cohort {
            start: from,
            points: points.to_vec(),
            stops: stops.to_vec(),
        };
        Ok(self.sweep(std::slice::from_ref(&cohort))?.pop().unwrap())
    }

    /// Integrates every cohort to each of its stop times. Cohorts share
    /// the velocity evaluations, so many start times cost about as much as
    /// one forward and one backward pass. Result is indexed
    /// `[cohort][stop][point]`.
    pub fn sweep(&self, cohorts: &[Cohort]) -> Result<Vec<Vec<Vec<Vec2>>>> {
        let mut out: Vec<Vec<Option<Vec<Vec2>>>> = cohorts.iter().map(|c| vec![None; c.stops.len()]).collect();
        for c in cohorts {
            self.check_time(c.start)?;
            for &s in &c.stops {
                self.check_time(s)?;
            }
        }
        for forward in [true, false] {
            self.directed_sweep(cohorts, forward, &mut out)?;
        }
        Ok(out
            .into_iter()
            .map(|v| v.into_iter().map(|x| x.expect("every stop visited")).collect())
            .collect())
    }

    fn directed_sweep(&self, cohorts: &[Cohort], forward: bool, out: &mut [Vec<Option<Vec<Vec2>>>]) -> Result<()> {
        let on_side = |start: f64, s: f64| if forward { s >= start } else { s < start };
        let ahead = |a: f64, b: f64| if forward { a < b } else { a > b };
        // Exact-time bookkeeping: nodes are the literal start and stop values.
        let mut nodes: Vec<f64> = Vec::new();
        for c in cohorts {
            let st = self.check_time(c.start)?;
            let mine: Vec<f64> = c.stops.iter().map(|&s| self.check_time(s).unwrap()).filter(|&s| on_side(st, s)).collect();
            if !mine.is_empty() {
                nodes.push(st);
                nodes.extend(mine);
            }
        }
        if nodes.is_empty() {
            return Ok(());
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        if !forward {
            nodes.reverse();
        }
        // Active state: (cohort index, positions).
        let mut active: Vec<(usize, Vec<Vec2>)> = Vec::new();
        let mut t = nodes[0];
        for (ni, &node) in nodes.iter().enumerate() {
            if ni > 0 && !active.is_empty() {
                self.advance(&mut active, t, node)?;
            }
            t = node;
            for (ci, c) in cohorts.iter().enumerate() {
                let st = self.check_time(c.start)?;
                if st == node && c.stops.iter().any(|&s| on_side(st, self.check_time(s).unwrap())) {
                    active.push((ci, c.points.clone()));
                }
            }
            for (ci, pts) in &active {
                let c = &cohorts[*ci];
                let st = self.check_time(c.start)?;
                for (k, &s) in c.stops.iter().enumerate() {
                    let s = self.check_time(s)?;
                    if s == node && on_side(st, s) {
                        out[*ci][k] = Some(pts.clone());
                    }
                }
            }
            // Retire cohorts with no stop beyond this node.
            active.retain(|(ci, _)| {
                let c = &cohorts[*ci];
                let st = self.check_time(c.start).unwrap();
                c.stops
                    .iter()
                    .map(|&s| self.check_time(s).unwrap())
                    .any(|s| on_side(st, s) && ahead(node, s))
            });
        }
        Ok(())
    }

    /// Advances all active cohorts from t0 to t1 in equal steps no longer
    /// than the transport step.
    fn advance(&self, active: &mut [(usize, Vec<Vec2>)], t0: f64, t1: f64) -> Result<()> {
        let n = ((t1 - t0).abs() / self.step - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        let mut y: Vec<Vec2> = active.iter().flat_map(|(_, p)| p.iter().copied()).collect();
        let mut cache: Option<TimeSlice> = None;
        let history = &self.history;
        let mut rhs = |t: f64, pts: &[Vec2]| -> Result<Vec<Vec2>> {
            if history.is_time_independent() {
                if cache.is_none() {
                    cache = Some(history.evaluator_at(t)?);
                }
                return Ok(cache.as_ref().unwrap().eval(pts));
            }
            history.velocity_at(t, pts)
        };
        for k in 0..n {
            let t = t0 + k as f64 * h;
            let (next, _) = rk_step(self.config.integrator, t, h, &y, &mut rhs)?;
            y = next;
            guard(&y, t + h, self.bound)?;
        }
        let mut off = 0;
        for (_, p) in active.iter_mut() {
            let len = p.len();
            p.copy_from_slice(&y[off..off + len]);
            off += len;
        }
        Ok(())
    }

    /// X(s, t, labels).
    pub fn two_time(&self, s: f64, t: f64) -> Result<Vec<Vec2>> {
        self.transport(self.labels.points(), t, s)
    }

    /// X(s, t, labels) for all pairs of checkpoint times, indexed
    /// `[t][s][label]`.
    pub fn lattice(&self, checkpoints: &[f64]) -> Result<Vec<Vec<Vec<Vec2>>>> {
        let cohorts: Vec<Cohort> = checkpoints
            .iter()
            .map(|&t| Cohort {
                start: t,
                points: self.labels.points().to_vec(),
                stops: checkpoints.to_vec(),
            })
            .collect();
        self.sweep(&cohorts)
    }
}

/// Runs a flow map from time 0 to `t_end`. In self-consistent mode the
/// blob carriers and the labels are advanced as one ODE system; in
/// frozen-field mode only the labels move.
pub fn integrate_flow(field0: &VortexBlobField, t_end: f64, cfg: &FlowConfig, labels: impl Into<Labels>) -> Result<FlowMap> {
    let labels = labels.into();
    let (n_steps, h) = step_count(t_end, cfg)?;
    let extent = field0
        .extent()
        .max(labels.points().iter().map(|p| p.norm()).fold(0.0, f64::max))
        .max(field0.blob_scale());
    let bound = cfg.blowup_factor * extent;
    let nc = field0.len();
    let store = |k: usize| k % cfg.store_every == 0 || k == n_steps;

    match cfg.coupling {
        Coupling::SelfConsistent => {
            let method = cfg.velocity;
            let mut rhs = |_t: f64, y: &[Vec2]| -> Result<Vec<Vec2>> {
                let field = field0.moved_to(y[..nc].to_vec())?;
                Ok(VelocityEvaluator::new(field, method)?.eval(y))
            };
            let mut y: Vec<Vec2> = field0.positions().iter().chain(labels.points()).copied().collect();
            let mut times = Vec::new();
            let mut states = Vec::new();
            let mut positions = Vec::new();
            let mut velocities = Vec::new();
            for k in 0..=n_steps {
                let t = k as f64 * h;
                let k1 = if k < n_steps || store(k) { Some(rhs(t, &y)?) } else { None };
                if store(k) {
                    let v = k1.as_ref().unwrap();
                    times.push(if k == n_steps { t_end } else { t });
                    states.push(y[nc..].to_vec());
                    positions.push(y[..nc].to_vec());
                    velocities.push(v[..nc].to_vec());
                }
                if k == n_steps {
                    break;
                }
                y = rk_step_with(cfg.integrator, t, h, &y, k1.unwrap(), &mut rhs)?;
                guard(&y, t + h, bound)?;
            }
            let history = FieldHistory::Carriers(CarrierHistory {
                template: field0.clone(),
                method,
                times: times.clone(),
                positions,
                velocities,
            });
            Ok(FlowMap {
                labels,
                times,
                states,
                history,
                config: *cfg,
                step: h * cfg.store_every as f64,
                bound,
            })
        }
        Coupling::FrozenField => {
            let history = FieldHistory::Frozen(field0.clone(), cfg.velocity);
            run_tracers(history, t_end, cfg, labels, n_steps, h, bound)
        }
    }
}

/// Flow map of a closed-form velocity field.
pub fn integrate_analytic_flow(field: AnalyticField, t_end: f64, cfg: &FlowConfig, labels: impl Into<Labels>) -> Result<FlowMap> {
    let labels = labels.into();
    let (n_steps, h) = step_count(t_end, cfg)?;
    let extent = labels.points().iter().map(|p| p.norm()).fold(1.0, f64::max);
    run_tracers(FieldHistory::Analytic(field), t_end, cfg, labels, n_steps, h, cfg.blowup_factor * extent)
}

fn run_tracers(
    history: FieldHistory,
    t_end: f64,
    cfg: &FlowConfig,
    labels: Labels,
    n_steps: usize,
    h: f64,
    bound: f64,
) -> Result<FlowMap> {
    let slice = history.evaluator_at(0.0)?;
    let mut rhs = |_t: f64, y: &[Vec2]| -> Result<Vec<Vec2>> { Ok(slice.eval(y)) };
    let mut y = labels.points().to_vec();
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    for k in 0..n_steps {
        let t = k as f64 * h;
        y = rk_step(cfg.integrator, t, h, &y, &mut rhs)?.0;
        guard(&y, t + h, bound)?;
        if (k + 1) % cfg.store_every == 0 || k + 1 == n_steps {
            times.push(if k + 1 == n_steps { t_end } else { t + h });
            states.push(y.clone());
        }
    }
    Ok(FlowMap {
        labels,
        times,
        states,
        history,
        config: *cfg,
        step: h * cfg.store_every as f64,
        bound,
    })
}

/// X(0, t, labels), by integrating backward through the stored history.
pub fn backward_flow(flow: &FlowMap, t: f64) -> Result<Vec<Vec2>> {
    flow.transport(flow.labels().points(), t, 0.0)
}

fn step_count(t_end: f64, cfg: &FlowConfig) -> Result<(usize, f64)> {
    cfg.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end", format!("must be positive, got {t_end}")));
    }
    if cfg.dt > t_end * (1.0 + 1e-12) {
        return Err(Error::param("dt", format!("{} exceeds the final time {t_end}", cfg.dt)));
    }
    let n = (t_end / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t_end / n as f64))
}

fn guard(y: &[Vec2], t: f64, bound: f64) -> Result<()> {
    let b2 = bound * bound;
    if y.iter().any(|p| !(p.norm_sq() <= b2)) {
        return Err(Error::BlowUp { time: t, bound });
    }
    Ok(())
}

fn rk_step(integrator: Integrator, t: f64, h: f64, y: &[Vec2], rhs: &mut Rhs) -> Result<(Vec<Vec2>, Vec<Vec2>)> {
    let k1 = rhs(t, y)?;
    let next = rk_step_with(integrator, t, h, y, k1.clone(), rhs)?;
    Ok((next, k1))
}

/// One step given the slope k1 at the start.
fn rk_step_with(integrator: Integrator, t: f64, h: f64, y: &[Vec2], k1: Vec<Vec2>, rhs: &mut Rhs) -> Result<Vec<Vec2>> {
    let axpy = |a: f64, k: &[Vec2]| -> Vec<Vec2> { y.iter().zip(k).map(|(p, v)| *p + *v * a).collect() };
    match integrator {
        Integrator::Rk2 => {
            let k2 = rhs(t + 0.5 * h, &axpy(0.5 * h, &k1))?;
            Ok(axpy(h, &k2))
        }
        Integrator::Rk4 => {
            let k2 = rhs(t + 0.5 * h, &axpy(0.5 * h, &k1))?;
            let k3 = rhs(t + 0.5 * h, &axpy(0.5 * h, &k2))?;
            let k4 = rhs(t + h, &axpy(h, &k3))?;
            let c = h / 6.0;
            Ok((0..y.len())
                .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * c)
                .collect())
        }
    }
}
