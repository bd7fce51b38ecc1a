//! Runs the selected pipeline and writes its output directory.

use std::fs;
use std::time::Instant;

use l1euler::experiments::{
    run_existence_pipeline, run_kernel_scaling_experiment, run_probe_family, run_stability_experiment,
    ExistenceConfig, ProbeFamilyConfig, StabilityConfig,
};
use l1euler::field::{discretize_with, l1_norm, MollifierSpec, VortexBlobField};
use l1euler::flow::{integrate_flow, FlowMap, Labels};
use l1euler::grid::Grid;
use l1euler::io::{self, write_table};
use l1euler::weakform::{
    divfree_from_stream, make_bump, make_steady_bump, renormalized_residual, sym_weak_identity_gap,
    symmetrized_velocity_residual, symmetrized_vorticity_residual, weak_velocity_residual, BlobRun,
    ResidualReport,
};
use l1euler::{Error, Vec2};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::svg::{Plot, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Why a run did not produce a verdict.
#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Numerical(m) => m,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::BlowUp { .. } | Error::NonFinite(_) | Error::KernelSingularity | Error::InfiniteEnergy(_) => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Self::Usage(format!("output: {e}"))
    }
}

/// The verdict of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Verdict {
    fn new(passed: bool) -> Self {
        Self {
            passed,
            lines: Vec::new(),
        }
    }

    fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

/// Runs `cfg` and maps the outcome to an exit code, reporting on stderr
/// and stdout.
pub fn dispatch(cfg: &RunConfig) -> i32 {
    match run(cfg) {
        Ok(v) => {
            for l in &v.lines {
                println!("{l}");
            }
            if v.passed {
                println!("{}: passed", cfg.command);
                EXIT_OK
            } else {
                println!("{}: FAILED", cfg.command);
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Verdict, RunError> {
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join("config.toml"), cfg.to_toml())?;
    let started = Instant::now();
    let mut verdict = match cfg.command {
        Command::Simulate => simulate(cfg),
        Command::Verify => verify(cfg),
        Command::Stability => stability(cfg),
        Command::Existence => existence(cfg),
        Command::KernelCheck => kernel_check(cfg),
        Command::Probe => probe(cfg),
    }?;
    if !cfg.deterministic {
        verdict.note(format!("elapsed {:.2} s", started.elapsed().as_secs_f64()));
    }
    Ok(verdict)
}

fn csv_out(cfg: &RunConfig, name: &str) -> Result<impl std::io::Write, RunError> {
    Ok(io::create(&cfg.output.join(name))?)
}

fn plot(cfg: &RunConfig, name: &str, p: Plot) -> Result<(), RunError> {
    if cfg.plots {
        fs::write(cfg.output.join(name), p.render())?;
    }
    Ok(())
}

fn initial_field(cfg: &RunConfig) -> Result<VortexBlobField, RunError> {
    let n = &cfg.numerics;
    Ok(discretize_with(&cfg.initial, n.eps, n.n, MollifierSpec::gaussian())?)
}

fn solve(cfg: &RunConfig, labels: Labels) -> Result<(VortexBlobField, FlowMap), RunError> {
    let field0 = initial_field(cfg)?;
    let flow = integrate_flow(&field0, cfg.numerics.t_end, &cfg.numerics.flow_config(), labels)?;
    Ok((field0, flow))
}

#[derive(Serialize)]
struct SnapshotRow {
    time: f64,
    blobs: usize,
    circulation: f64,
    l1_norm: f64,
}

fn simulate(cfg: &RunConfig) -> Result<Verdict, RunError> {
    let s = &cfg.simulate;
    let grid = Grid::covering_ball(Vec2::ZERO, s.label_radius, s.label_spacing)?;
    let (field0, flow) = solve(cfg, Labels::grid_in_ball(grid, Vec2::ZERO, s.label_radius))?;
    io::write_field(csv_out(cfg, "field_initial.csv")?, &field0)?;
    let mut rows = Vec::new();
    let mut last = field0.clone();
    for &t in flow.times() {
        if let Some(f) = flow.history().field_at(t)? {
            rows.push(SnapshotRow {
                time: t,
                blobs: f.len(),
                circulation: f.total_circulation(),
                l1_norm: l1_norm(&f),
            });
            last = f;
        }
    }
    io::write_field(csv_out(cfg, "field_final.csv")?, &last)?;
    io::write_flow(csv_out(cfg, "flow.csv")?, &flow)?;
    write_table(csv_out(cfg, "summary.csv")?, "snapshots", &[], &rows)?;
    let drift = rows.iter().map(|r| (r.circulation - field0.total_circulation()).abs()).fold(0.0, f64::max);
    let mut v = Verdict::new(true);
    v.note(format!(
        "{} blobs, {} labels, {} snapshots, circulation drift {drift:e}",
        field0.len(),
        flow.labels().len(),
        flow.times().len()
    ));
    Ok(v)
}

#[derive(Serialize)]
struct ResidualRow {
    formulation: &'static str,
    residual: f64,
    quadrature_error_estimate: f64,
    scale: f64,
    relative: f64,
    time_term: f64,
    nonlinear_term: f64,
    initial_term: f64,
    final_term: f64,
}

impl From<&ResidualReport> for ResidualRow {
    fn from(r: &ResidualReport) -> Self {
        Self {
            formulation: r.formulation.name(),
            residual: r.residual,
            quadrature_error_estimate: r.quadrature_error_estimate,
            scale: r.scale,
            relative: r.relative(),
            time_term: r.terms.time,
            nonlinear_term: r.terms.nonlinear,
            initial_term: r.terms.initial,
            final_term: r.terms.final_time,
        }
    }
}

fn verify(cfg: &RunConfig) -> Result<Verdict, RunError> {
    let vs = &cfg.verify;
    let t_end = cfg.numerics.t_end;
    let (field0, flow) = solve(cfg, Labels::scattered(Vec::new()))?;
    let run = BlobRun::from_flow(&flow)?;
    let psi = make_bump(vs.test_center, vs.test_radius, t_end)?;
    let phi = divfree_from_stream(psi.clone());
    let reports = [
        renormalized_residual(&flow, &cfg.initial, vs.beta, &psi)?,
        symmetrized_vorticity_residual(&run, &psi, &field0)?,
        symmetrized_velocity_residual(&run, &phi)?,
        weak_velocity_residual(&run, &phi)?,
    ];
    let rows: Vec<ResidualRow> = reports.iter().map(ResidualRow::from).collect();
    write_table(csv_out(cfg, "residuals.csv")?, "residuals", &[], &rows)?;
    let gap = if field0.is_empty() {
        None
    } else {
        Some(sym_weak_identity_gap(&field0, &divfree_from_stream(make_steady_bump(vs.test_center, vs.test_radius)?))?)
    };
    write_table(csv_out(cfg, "identity_gap.csv")?, "identity_gap", &[], gap.as_slice())?;

    let mut v = Verdict::new(true);
    for r in &reports {
        let ok = r.relative() <= vs.tolerance;
        v.passed &= ok;
        v.note(format!(
            "{:<22} residual {:+.3e}  estimate {:.3e}  relative {:.3e}{}",
            r.formulation.name(),
            r.residual,
            r.quadrature_error_estimate,
            r.relative(),
            if ok { "" } else { "  (above tolerance)" }
        ));
    }
    if let Some(g) = gap {
        let ok = g.relative_to_scale <= vs.tolerance;
        v.passed &= ok;
        v.note(format!("identity gap {:.3e}  relative to scale {:.3e}", g.gap, g.relative_to_scale));
    }
    Ok(v)
}

fn stability(cfg: &RunConfig) -> Result<Verdict, RunError> {
    let st = &cfg.stability;
    let report = run_stability_experiment(&StabilityConfig {
        base: cfg.initial.clone(),
        perturbation: st.perturbation,
        n_levels: st.n_levels,
        t_end: cfg.numerics.t_end,
        flow: cfg.numerics.flow_config(),
        setup: st.setup,
    })?;
    report.write_levels(csv_out(cfg, "levels.csv")?)?;
    let mut v = Verdict::new(report.passed());
    for t in &report.trends {
        v.note(format!("{:<10} {:?} {}", t.metric, t.values, if t.passed { "ok" } else { "not decreasing" }));
        for w in t.warnings() {
            v.note(format!("warning: {w}"));
        }
    }
    if let Some(o) = report.oscillation {
        v.note(format!("smallest vorticity step {:.3e} (floor {:.3e})", o.min_step, o.threshold));
    }
    let series = |name: &str, f: fn(&l1euler::experiments::StabilityRow) -> Option<f64>| Series {
        name: name.into(),
        points: report.rows.iter().filter_map(|r| f(r).map(|y| (r.level as f64, y))).collect(),
    };
    plot(
        cfg,
        "distances.svg",
        Plot {
            title: format!("distance to the limit, {}", report.mode),
            x_label: "level".into(),
            y_label: "distance".into(),
            log_x: false,
            log_y: true,
            series: vec![
                series("flow", |r| r.flow),
                series("vorticity", |r| r.vorticity),
                series("velocity", |r| r.velocity),
                series("pairing", |r| r.pairing),
            ],
        },
    )?;
    Ok(v)
}

fn existence(cfg: &RunConfig) -> Result<Verdict, RunError> {
    let ex = &cfg.existence;
    let report = run_existence_pipeline(&ExistenceConfig {
        initial: cfg.initial.clone(),
        eps_levels: ex.eps_levels.clone(),
        t_end: cfg.numerics.t_end,
        flow: cfg.numerics.flow_config(),
        setup: ex.setup,
        spacing_ratio: ex.spacing_ratio,
    })?;
    report.write_levels(csv_out(cfg, "levels.csv")?)?;
    report.write_steps(csv_out(cfg, "steps.csv")?)?;
    let mut v = Verdict::new(report.passed());
    for t in &report.trends {
        v.note(format!("{:<10} {:?} {}", t.metric, t.values, if t.passed { "ok" } else { "not decreasing" }));
    }
    for w in report.warnings() {
        v.note(format!("warning: {w}"));
    }
    v.note(format!("circulation drift {:e}", report.max_circulation_drift()));
    let series = |name: &str, f: fn(&l1euler::experiments::StepRow) -> f64| Series {
        name: name.into(),
        points: report.steps.iter().map(|s| (s.eps_fine, f(s))).collect(),
    };
    plot(
        cfg,
        "steps.svg",
        Plot {
            title: "distance between consecutive levels".into(),
            x_label: "finer eps".into(),
            y_label: "distance".into(),
            log_x: true,
            log_y: true,
            series: vec![
                series("flow", |s| s.flow),
                series("vorticity", |s| s.vorticity),
                series("velocity", |s| s.velocity),
            ],
        },
    )?;
    Ok(v)
}

fn kernel_check(cfg: &RunConfig) -> Result<Verdict, RunError> {
    let k = &cfg.kernel;
    let report = run_kernel_scaling_experiment(&k.p_list, &k.h_list, &k.quadrature)?;
    report.write_slopes(csv_out(cfg, "slopes.csv")?)?;
    report.write_points(csv_out(cfg, "points.csv")?)?;
    let mut v = Verdict::new(report.passed());
    for r in &report.rows {
        v.note(format!(
            "p = {:.4}  alpha = {:.4}  slope = {:.4}  max relative error {:.2e}{}",
            r.p,
            r.alpha,
            r.slope,
            r.max_relative_error,
            if r.inconclusive { "  INCONCLUSIVE" } else { "" }
        ));
    }
    plot(
        cfg,
        "slopes.svg",
        Plot {
            title: "translation norm of the kernel".into(),
            x_label: "|h|".into(),
            y_label: "norm".into(),
            log_x: true,
            log_y: true,
            series: report
                .rows
                .iter()
                .map(|r| Series {
                    name: format!("p = {:.3}", r.p),
                    points: report.points.iter().filter(|q| q.p == r.p).map(|q| (q.h, q.value)).collect(),
                })
                .collect(),
        },
    )?;
    Ok(v)
}

fn probe(cfg: &RunConfig) -> Result<Verdict, RunError> {
    let pr = &cfg.probe;
    let base = initial_field(cfg)?;
    let report = run_probe_family(
        &base,
        &ProbeFamilyConfig {
            deltas: pr.deltas.clone(),
            target: pr.target,
            t_end: cfg.numerics.t_end,
            flow: cfg.numerics.flow_config(),
            probe: pr.settings.clone(),
        },
    )?;
    report.write_rows(csv_out(cfg, "family.csv")?)?;
    report.write_fits(csv_out(cfg, "fits.csv")?)?;
    let mut v = Verdict::new(report.passed());
    for f in &report.fits {
        v.note(format!(
            "gamma {:.1e} lambda {:.2}: slope {} max ratio {}",
            f.gamma,
            f.lambda,
            f.slope.map_or("undefined".into(), |s| format!("{s:.3}")),
            f.max_ratio.map_or("undefined".into(), |r| format!("{r:.3e}")),
        ));
    }
    plot(
        cfg,
        "envelope.svg",
        Plot {
            title: "flow distance against velocity difference".into(),
            x_label: "velocity L1".into(),
            y_label: "flow distance".into(),
            log_x: true,
            log_y: true,
            series: report
                .fits
                .iter()
                .map(|f| Series {
                    name: format!("gamma {:.0e}, lambda {:.1}", f.gamma, f.lambda),
                    points: report
                        .rows
                        .iter()
                        .filter(|r| r.gamma == f.gamma && r.lambda == f.lambda)
                        .map(|r| (r.velocity_l1, r.distance))
                        .collect(),
                })
                .collect(),
        },
    )?;
    Ok(v)
}
