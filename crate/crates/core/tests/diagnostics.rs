use std::f64::consts::PI;

use l1euler::diagnostics::*;
use l1euler::field::{discretize, l1_norm, sample_vorticity, InitialVorticitySpec, MollifierSpec, VortexBlobField};
use l1euler::grid::Grid;
use l1euler::Vec2;
use proptest::prelude::*;

fn ball_grid(r: f64, h: f64) -> Grid {
    Grid::covering_ball(Vec2::ZERO, r, h).unwrap()
}

#[test]
fn inverse_distance_has_seminorm_root_pi() {
    let f = SampledScalarField::from_fn(ball_grid(1.0, 1e-3), |x| 1.0 / x.norm()).unwrap();
    let m = m2_seminorm(&f, 1.0).unwrap();
    assert!((m - PI.sqrt()).abs() <= 0.03 * PI.sqrt(), "{m}");
}

#[test]
fn zero_has_zero_seminorm() {
    let f = SampledScalarField::from_fn(ball_grid(1.0, 0.01), |_| 0.0).unwrap();
    assert_eq!(m2_seminorm(&f, 1.0).unwrap(), 0.0);
}

#[test]
fn seminorm_is_below_the_l2_norm() {
    let g = ball_grid(1.0, 0.01);
    for c in [0.5, 1.0, 3.0] {
        let u = move |x: Vec2| (-c * x.norm_sq()).exp() * (1.0 + x.x1);
        let f = SampledScalarField::from_fn(g, u).unwrap();
        let l2 = g.points_in_ball(Vec2::ZERO, 1.0).iter().map(|&x| u(x).powi(2)).sum::<f64>() * g.cell_area();
        assert!(m2_seminorm(&f, 1.0).unwrap() <= l2.sqrt());
    }
}

#[test]
fn point_vortex_speed_ratio() {
    let f = VortexBlobField::new(vec![Vec2::ZERO], vec![1.0], 1e-3, MollifierSpec::gaussian()).unwrap();
    let ratio = hls_ratio(&f, 1.0).unwrap();
    let expect = PI.sqrt() / (2.0 * PI);
    assert!((ratio - expect).abs() <= 0.05 * expect, "{ratio}");
}

#[test]
fn ratio_is_scale_invariant() {
    let f = discretize(&InitialVorticitySpec::rankine(1.0, 0.5), 0.05, 32).unwrap();
    let a = hls_ratio(&f, 1.0).unwrap();
    let b = hls_ratio(&f.scaled(7.5), 1.0).unwrap();
    assert!((a - b).abs() <= 1e-12 * a, "{a} {b}");
}

#[test]
fn two_patches_stay_below_twice_one() {
    let spec = |c: Vec2| InitialVorticitySpec::PatchUnion {
        patches: vec![l1euler::field::Patch {
            center: c,
            radius: 0.3,
            strength: 1.0,
        }],
    };
    let one = discretize(&spec(Vec2::new(-0.5, 0.0)), 0.03, 40).unwrap();
    let other = discretize(&spec(Vec2::new(0.5, 0.0)), 0.03, 40).unwrap();
    let both = VortexBlobField::new(
        one.positions().iter().chain(other.positions()).copied().collect(),
        one.weights().iter().chain(other.weights()).copied().collect(),
        0.03,
        MollifierSpec::gaussian(),
    )
    .unwrap();
    let single = hls_ratio(&one, 1.5).unwrap();
    let pair = hls_ratio(&both, 1.5).unwrap();
    assert!(pair <= 2.0 * single, "{pair} vs {single}");
}

#[test]
fn zero_vorticity_ratio_is_undefined() {
    let f = VortexBlobField::empty(0.1, MollifierSpec::gaussian()).unwrap();
    assert!(matches!(hls_ratio(&f, 1.0), Err(l1euler::Error::Undefined(_))));
}

#[test]
fn measure_distance_basics() {
    let g = ball_grid(1.0, 0.005);
    let u = SampledScalarField::from_fn(g, |x| x.x1.sin()).unwrap();
    assert_eq!(local_measure_distance(&u, &u, 1e-12, 1.0).unwrap(), 0.0);
    let shifted = SampledScalarField::from_fn(g, |x| x.x1.sin() + 0.2).unwrap();
    let d = local_measure_distance(&shifted, &u, 0.1, 1.0).unwrap();
    assert!((d - PI).abs() <= 0.01 * PI, "{d}");
    let other = SampledScalarField::from_fn(ball_grid(1.0, 0.01), |_| 0.0).unwrap();
    assert!(local_measure_distance(&u, &other, 0.1, 1.0).is_err());
}

#[test]
fn mollified_indicator_converges_in_measure() {
    let g = ball_grid(1.5, 0.005);
    let spec = InitialVorticitySpec::rankine(1.0, 1.0);
    let exact = SampledScalarField::from_fn(g, |x| spec.eval(x)).unwrap();
    let d: Vec<f64> = [0.08, 0.04, 0.02]
        .iter()
        .map(|&eps: &f64| {
            let blobs = discretize(&spec, eps, (4.0 / eps) as usize).unwrap();
            let smooth = SampledScalarField::new(g, sample_vorticity(&blobs, &g.points())).unwrap();
            local_measure_distance(&smooth, &exact, 0.25, 1.5).unwrap()
        })
        .collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    // The difference lives in an annulus of width comparable to ε.
    assert!(d[2] < 2.0 * PI * 2.0 * 0.02 * 2.0, "{d:?}");
}

#[test]
fn pairing_with_one_is_total_circulation() {
    let f = discretize(&InitialVorticitySpec::sign_changing_pair(1.0, 0.4, 1.0), 0.05, 40).unwrap();
    assert_eq!(weak_l1_pairing(&f, &DictionaryFunction::Constant { value: 1.0 }), f.total_circulation());
}

#[test]
fn pairing_a_patch_with_its_indicator_gives_its_area() {
    let f = discretize(&InitialVorticitySpec::rankine(1.0, 1.0), 0.02, 100).unwrap();
    let g = DictionaryFunction::SmoothIndicator {
        center: Vec2::ZERO,
        radius: 1.0,
        width: 0.02,
    };
    let p = weak_l1_pairing(&f, &g);
    assert!((p - PI).abs() <= 0.02 * PI, "{p}");
}

#[test]
fn dictionary_has_sixteen_bounded_entries() {
    let d = pairing_dictionary();
    assert_eq!(d.len(), 16);
    let g = ball_grid(2.0, 0.05).points();
    for f in &d {
        assert!(g.iter().all(|&x| f.eval(x).abs() <= f.sup_abs()));
    }
}

fn cloud() -> impl Strategy<Value = (Vec<Vec2>, Vec<f64>)> {
    prop::collection::vec(((-2.0..2.0f64, -2.0..2.0f64), -3.0..3.0f64), 1..60)
        .prop_map(|v| v.into_iter().map(|((a, b), w)| (Vec2::new(a, b), w)).unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn seminorm_is_positively_homogeneous(c in -5.0..5.0f64, a in 0.1..3.0f64) {
        let g = ball_grid(1.0, 0.02);
        let u = SampledScalarField::from_fn(g, |x| (a * x.x1).cos() + x.x2).unwrap();
        let cu = SampledScalarField::from_fn(g, |x| c * ((a * x.x1).cos() + x.x2)).unwrap();
        let (m, mc) = (m2_seminorm(&u, 1.0).unwrap(), m2_seminorm(&cu, 1.0).unwrap());
        prop_assert!((mc - c.abs() * m).abs() <= 1e-12 * m.max(1.0));
    }

    #[test]
    fn measure_distance_triangle(gamma in 0.05..1.0f64, p in 0.5..3.0f64, q in 0.5..3.0f64) {
        let g = ball_grid(1.0, 0.02);
        let u = SampledScalarField::from_fn(g, |x| (p * x.x1).sin()).unwrap();
        let v = SampledScalarField::from_fn(g, |x| (q * x.x2).cos() * x.x1).unwrap();
        let w = SampledScalarField::from_fn(g, |x| x.norm_sq()).unwrap();
        let uw = local_measure_distance(&u, &w, 2.0 * gamma, 1.0).unwrap();
        let uv = local_measure_distance(&u, &v, gamma, 1.0).unwrap();
        let vw = local_measure_distance(&v, &w, gamma, 1.0).unwrap();
        prop_assert!(uw <= uv + vw);
    }

    #[test]
    fn pairing_is_linear_and_bounded((pos, w) in cloud(), a in -2.0..2.0f64, k in 0usize..16) {
        let g = pairing_dictionary()[k];
        let f = VortexBlobField::new(pos, w, 0.1, MollifierSpec::gaussian()).unwrap();
        let p = weak_l1_pairing(&f, &g);
        let pa = weak_l1_pairing(&f.scaled(a), &g);
        prop_assert!((pa - a * p).abs() <= 1e-12 * (1.0 + l1_norm(&f) * a.abs()));
        prop_assert!(p.abs() <= g.sup_abs() * l1_norm(&f) * (1.0 + 1e-12));
    }
}
