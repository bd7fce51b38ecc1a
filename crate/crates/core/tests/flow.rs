use std::f64::consts::{E, PI};

use approx::assert_abs_diff_eq;
use l1euler::field::{discretize, InitialVorticitySpec, MollifierSpec, VortexBlobField};
use l1euler::flow::*;
use l1euler::grid::Grid;
use l1euler::Vec2;

fn point_vortex(circulation: f64, eps: f64) -> VortexBlobField {
    VortexBlobField::new(vec![Vec2::ZERO], vec![circulation], eps, MollifierSpec::gaussian()).unwrap()
}

fn rotate(p: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * p.x1 - s * p.x2, s * p.x1 + c * p.x2)
}

fn box_labels(half: f64, spacing: f64) -> Labels {
    Labels::grid(Grid::covering_box(Vec2::new(-half, -half), Vec2::new(half, half), spacing).unwrap())
}

#[test]
fn point_vortex_tracer_returns_after_one_period() {
    // Γ = 2π at unit radius turns at unit angular speed.
    let f = point_vortex(2.0 * PI, 1e-3);
    let m = integrate_flow(&f, 2.0 * PI, &FlowConfig::new(1e-3), vec![Vec2::new(1.0, 0.0)]).unwrap();
    let end = m.states().last().unwrap()[0];
    assert!((end - Vec2::new(1.0, 0.0)).norm() < 1e-5, "{end:?}");
}

#[test]
fn point_vortex_backward_flow_rotates_by_negative_angle() {
    let f = point_vortex(2.0 * PI, 1e-3);
    let start = vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, -0.8)];
    let m = integrate_flow(&f, 1.0, &FlowConfig::new(1e-3), start).unwrap();
    let back = backward_flow(&m, 1.0).unwrap();
    for (p, b) in m.labels().points().iter().zip(&back) {
        let omega = 1.0 / p.norm_sq();
        let expect = rotate(*p, -omega);
        assert!((*b - expect).norm() < 1e-5, "{b:?} vs {expect:?}");
    }
}

#[test]
fn zero_field_is_the_identity() {
    let f = VortexBlobField::empty(0.1, MollifierSpec::gaussian()).unwrap();
    let labels = vec![Vec2::new(0.3, -0.2), Vec2::new(-1.0, 2.0)];
    let m = integrate_flow(&f, 1.0, &FlowConfig::new(0.1), labels.clone()).unwrap();
    for s in [0.0, 0.35, 1.0] {
        assert_eq!(m.two_time(s, 0.7).unwrap(), labels);
    }
}

#[test]
fn backward_flow_at_time_zero_is_the_identity() {
    let f = point_vortex(1.0, 0.1);
    let labels = vec![Vec2::new(0.3, -0.2), Vec2::new(0.5, 0.5)];
    let m = integrate_flow(&f, 0.5, &FlowConfig::new(0.05), labels.clone()).unwrap();
    assert_eq!(backward_flow(&m, 0.0).unwrap(), labels);
}

#[test]
fn anchor_time_is_exact() {
    let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), 0.1, 24).unwrap();
    let labels = vec![Vec2::new(0.3, -0.2), Vec2::new(0.9, 0.1)];
    let m = integrate_flow(&f, 0.5, &FlowConfig::new(0.05), labels.clone()).unwrap();
    for t in [0.0, 0.2, 0.5] {
        assert_eq!(m.two_time(t, t).unwrap(), labels);
    }
}

#[test]
fn rankine_core_turns_rigidly() {
    let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), 0.04, 56).unwrap();
    // Core angular velocity is half the vorticity: one period is 4π.
    let m = integrate_flow(&f, 4.0 * PI, &FlowConfig::new(2e-2), vec![Vec2::new(0.5, 0.0)]).unwrap();
    for (t, state) in m.times().iter().zip(m.states()) {
        let p = state[0];
        let turned = p.x2.atan2(p.x1).rem_euclid(2.0 * PI);
        let expect = (0.5 * t).rem_euclid(2.0 * PI);
        let diff = (turned - expect + PI).rem_euclid(2.0 * PI) - PI;
        assert!(diff.abs() <= 0.01 * 2.0 * PI, "t={t} angle {turned} expected {expect}");
        assert_abs_diff_eq!(p.norm(), 0.5, epsilon = 5e-3);
    }
}

#[test]
fn forward_then_backward_composes_to_identity() {
    let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), 0.05, 48).unwrap();
    let labels: Vec<Vec2> = (0..16).map(|k| rotate(Vec2::new(0.1 + 0.08 * k as f64, 0.0), k as f64)).collect();
    let cfg = FlowConfig {
        store_every: 1,
        ..FlowConfig::new(1e-3)
    };
    let m = integrate_flow(&f, 1.0, &cfg, labels.clone()).unwrap();
    let forward = m.states().last().unwrap().clone();
    let back = m.transport(&forward, 1.0, 0.0).unwrap();
    let err = back.iter().zip(&labels).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn composition_error_converges_at_fourth_order() {
    let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), 0.1, 24).unwrap();
    let labels: Vec<Vec2> = (0..8).map(|k| Vec2::new(0.15 * (k + 1) as f64, 0.05)).collect();
    let errors: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&dt| {
            let cfg = FlowConfig {
                coupling: Coupling::FrozenField,
                store_every: 1,
                ..FlowConfig::new(dt)
            };
            let m = integrate_flow(&f, 4.0, &cfg, labels.clone()).unwrap();
            // Backward with a different step so the errors do not cancel.
            let coarse = m.transport(m.states().last().unwrap(), 4.0, 0.0).unwrap();
            coarse.iter().zip(&labels).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max)
        })
        .collect();
    let order = (errors[1] / errors[2]).log2();
    assert!(order >= 3.9, "{errors:?} order {order}");
}

#[test]
fn rk2_is_less_accurate_than_rk4() {
    let f = point_vortex(2.0 * PI, 1e-3);
    let run = |integrator| {
        let cfg = FlowConfig {
            integrator,
            ..FlowConfig::new(1e-2)
        };
        let m = integrate_flow(&f, 2.0 * PI, &cfg, vec![Vec2::new(1.0, 0.0)]).unwrap();
        (m.states().last().unwrap()[0] - Vec2::new(1.0, 0.0)).norm()
    };
    assert!(run(Integrator::Rk2) > 10.0 * run(Integrator::Rk4));
}

#[test]
fn runaway_trajectories_abort() {
    let cfg = FlowConfig {
        blowup_factor: 2.0,
        ..FlowConfig::new(0.1)
    };
    let field = AnalyticField::Translation {
        velocity: Vec2::new(10.0, 0.0),
    };
    assert!(integrate_analytic_flow(field, 1.0, &cfg, vec![Vec2::new(1.0, 0.0)]).is_err());
}

#[test]
fn config_is_validated() {
    let f = point_vortex(1.0, 0.1);
    assert!(integrate_flow(&f, 1.0, &FlowConfig::new(-1.0), vec![Vec2::ZERO]).is_err());
    assert!(integrate_flow(&f, 1.0, &FlowConfig::new(2.0), vec![Vec2::ZERO]).is_err());
    assert!(integrate_flow(&f, 0.0, &FlowConfig::new(0.1), vec![Vec2::ZERO]).is_err());
    let m = integrate_flow(&f, 1.0, &FlowConfig::new(0.1), vec![Vec2::ZERO]).unwrap();
    assert!(backward_flow(&m, 1.5).is_err());
}

#[test]
fn carriers_keep_their_weights() {
    let f = discretize(&InitialVorticitySpec::sign_changing_pair(1.0, 0.4, 1.0), 0.08, 24).unwrap();
    let m = integrate_flow(&f, 0.5, &FlowConfig::new(0.05), Vec::<Vec2>::new()).unwrap();
    let c = m.carriers().unwrap();
    for k in 0..c.times().len() {
        assert_eq!(c.snapshot(k).weights(), f.weights());
    }
}

fn rankine_flow(eps: f64, n: usize, t_end: f64) -> FlowMap {
    let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), eps, n).unwrap();
    integrate_flow(&f, t_end, &FlowConfig::new(2e-2), Vec::<Vec2>::new()).unwrap()
}

#[test]
fn pushforward_at_time_zero_is_the_initial_profile() {
    let spec = InitialVorticitySpec::sign_changing_pair(1.0, 0.4, 1.0);
    let f = discretize(&spec, 0.08, 24).unwrap();
    let m = integrate_flow(&f, 0.2, &FlowConfig::new(0.05), box_labels(1.0, 0.1)).unwrap();
    let q: Vec<Vec2> = (0..50).map(|k| Vec2::new(-1.0 + 0.04 * k as f64, 0.1)).collect();
    let p = pushforward_vorticity(&spec, &m, 0.0, &q).unwrap();
    let expect: Vec<f64> = q.iter().map(|&x| spec.eval(x)).collect();
    assert_eq!(p.values, expect);
}

#[test]
fn radial_data_is_stationary_under_pushforward() {
    let spec = InitialVorticitySpec::LambOseen {
        circulation: 1.0,
        core_radius: 0.3,
        center: Vec2::ZERO,
    };
    let f = discretize(&spec, 0.05, 48).unwrap();
    let m = integrate_flow(&f, 1.0, &FlowConfig::new(2e-2), box_labels(1.0, 0.05)).unwrap();
    let q = Grid::covering_box(Vec2::new(-0.8, -0.8), Vec2::new(0.8, 0.8), 0.05).unwrap().points();
    let p = pushforward_vorticity(&spec, &m, 1.0, &q).unwrap();
    let peak = spec.eval(Vec2::ZERO);
    for (x, w) in q.iter().zip(&p.values) {
        assert!((w - spec.eval(*x)).abs() <= 0.01 * peak, "{x:?}");
    }
}

#[test]
fn patch_keeps_its_area_and_l1_norm() {
    let spec = InitialVorticitySpec::rankine(1.0, 1.0);
    let m = rankine_flow(0.04, 56, 1.0);
    let g = Grid::covering_box(Vec2::new(-1.5, -1.5), Vec2::new(1.5, 1.5), 0.01).unwrap();
    let q = g.points();
    for t in [0.0, 0.5, 1.0] {
        let p = pushforward_vorticity(&spec, &m, t, &q).unwrap();
        let area = p.values.iter().filter(|&&w| w > 0.5).count() as f64 * g.cell_area();
        assert!((area - PI).abs() <= 0.02 * PI, "t={t} area {area}");
        let l1 = p.values.iter().map(|w| w.abs()).sum::<f64>() * g.cell_area();
        assert!((l1 - PI).abs() <= 0.02 * PI, "t={t} l1 {l1}");
    }
}

#[test]
fn pushforward_commutes_with_pointwise_maps() {
    let m = rankine_flow(0.1, 24, 0.4);
    let q: Vec<Vec2> = (0..40).map(|k| rotate(Vec2::new(0.03 * k as f64, 0.0), 0.3 * k as f64)).collect();
    let a = pushforward_vorticity(&InitialVorticitySpec::rankine(1.0, 1.0), &m, 0.4, &q).unwrap();
    let b = pushforward_vorticity(&InitialVorticitySpec::rankine(3.0, 1.0), &m, 0.4, &q).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert_eq!(3.0 * x, *y);
    }
}

#[test]
fn queries_outside_the_labels_are_flagged() {
    let spec = InitialVorticitySpec::rankine(1.0, 1.0);
    let f = discretize(&spec, 0.1, 24).unwrap();
    let m = integrate_flow(&f, 0.2, &FlowConfig::new(0.05), box_labels(1.0, 0.1)).unwrap();
    let p = pushforward_vorticity(&spec, &m, 0.2, &[Vec2::new(0.2, 0.0), Vec2::new(5.0, 0.0)]).unwrap();
    assert_eq!(p.outside, vec![false, true]);
}

#[test]
fn contraction_compresses_by_e_squared() {
    let cfg = FlowConfig::new(1e-2);
    let m = integrate_analytic_flow(AnalyticField::Contraction { rate: 1.0 }, 1.0, &cfg, box_labels(1.0, 1.0 / 128.0)).unwrap();
    let c = compressibility_estimate(&m, 0.0, 1.0).unwrap();
    assert!((c.value - E * E).abs() <= 0.05 * E * E, "{c:?}");
}

#[test]
fn identity_flow_has_unit_compressibility() {
    let m = integrate_analytic_flow(AnalyticField::Zero, 1.0, &FlowConfig::new(0.1), box_labels(1.0, 1.0 / 64.0)).unwrap();
    let c = compressibility_estimate(&m, 0.0, 1.0).unwrap();
    assert_eq!((c.value, c.min_ratio), (1.0, 1.0));
    assert!(!c.variance_warning);
    let small = compressibility_estimate_with(&m, 0.0, 1.0, 8).unwrap();
    assert!(small.variance_warning);
}

#[test]
fn vortex_flow_is_measure_preserving() {
    let f = point_vortex(1.0, 0.1);
    let cfg = FlowConfig {
        coupling: Coupling::FrozenField,
        ..FlowConfig::new(5e-3)
    };
    let m = integrate_flow(&f, 1.0, &cfg, box_labels(1.0, 1.0 / 128.0)).unwrap();
    let c = compressibility_estimate(&m, 0.0, 1.0).unwrap();
    assert!((c.value - 1.0).abs() <= 0.05, "{c:?}");
}

#[test]
fn compressibility_needs_grid_labels() {
    let m = integrate_analytic_flow(AnalyticField::Zero, 1.0, &FlowConfig::new(0.5), vec![Vec2::ZERO]).unwrap();
    assert!(compressibility_estimate(&m, 0.0, 1.0).is_err());
}

fn ball_labels(r: f64, spacing: f64) -> Labels {
    Labels::grid_in_ball(Grid::covering_ball(Vec2::ZERO, r, spacing).unwrap(), Vec2::ZERO, r)
}

#[test]
fn identical_flows_are_at_distance_zero() {
    let f = point_vortex(1.0, 0.1);
    let m = integrate_flow(&f, 0.5, &FlowConfig::new(0.05), ball_labels(1.0, 0.05)).unwrap();
    assert_eq!(flow_measure_distance(&m, &m, 1e-9, 1.0, 0.0, 0.5).unwrap(), 0.0);
}

#[test]
fn shifted_flows_are_apart_on_the_whole_ball() {
    let gamma = 0.1;
    let cfg = FlowConfig::new(0.1);
    let labels = ball_labels(1.0, 0.01);
    let still = integrate_analytic_flow(AnalyticField::Zero, 1.0, &cfg, labels.clone()).unwrap();
    let shift = AnalyticField::Translation {
        velocity: Vec2::new(2.0 * gamma, 0.0),
    };
    let moved = integrate_analytic_flow(shift, 1.0, &cfg, labels).unwrap();
    let d = flow_measure_distance(&still, &moved, gamma, 1.0, 1.0, 0.0).unwrap();
    assert!((d - PI).abs() <= 0.01 * PI, "{d}");
}

#[test]
fn different_label_grids_are_rejected() {
    let cfg = FlowConfig::new(0.5);
    let a = integrate_analytic_flow(AnalyticField::Zero, 1.0, &cfg, ball_labels(1.0, 0.1)).unwrap();
    let b = integrate_analytic_flow(AnalyticField::Zero, 1.0, &cfg, ball_labels(1.0, 0.05)).unwrap();
    assert!(flow_measure_distance(&a, &b, 0.1, 1.0, 0.0, 1.0).is_err());
}

#[test]
fn distance_between_mollification_levels_shrinks() {
    let spec = InitialVorticitySpec::rankine(1.0, 1.0);
    let cfg = FlowConfig {
        coupling: Coupling::FrozenField,
        ..FlowConfig::new(5e-2)
    };
    let labels = ball_labels(1.5, 0.01);
    let flows: Vec<FlowMap> = [0.16, 0.08, 0.04, 0.02]
        .iter()
        .map(|&eps: &f64| {
            let n = (2.0_f64 / eps).ceil() as usize;
            integrate_flow(&discretize(&spec, eps, n).unwrap(), 2.0, &cfg, labels.clone()).unwrap()
        })
        .collect();
    let d: Vec<f64> = flows
        .windows(2)
        .map(|w| flow_measure_distance(&w[0], &w[1], 1e-2, 1.5, 0.0, 2.0).unwrap())
        .collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}
