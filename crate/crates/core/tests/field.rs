use l1euler::field::*;
use l1euler::Vec2;
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = (Vec<Vec2>, Vec<f64>)> {
    prop::collection::vec(((-1.0..1.0f64, -1.0..1.0f64), -1.0..1.0f64), 20..200)
        .prop_map(|v| v.into_iter().map(|((a, b), w)| (Vec2::new(a, b), w)).unzip())
}

fn field(pos: Vec<Vec2>, w: Vec<f64>, eps: f64) -> VortexBlobField {
    VortexBlobField::new(pos, w, eps, MollifierSpec::gaussian()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn velocity_is_linear_in_the_weights((pos, w) in cloud(), c in -4.0..4.0f64) {
        let f = field(pos, w, 0.05);
        let targets = [Vec2::new(0.3, -0.2), Vec2::new(1.5, 0.7), Vec2::new(-0.9, 0.05)];
        let v = velocity_direct(&f, &targets);
        let vc = velocity_direct(&f.scaled(c), &targets);
        for (a, b) in v.iter().zip(&vc) {
            prop_assert!((*a * c - *b).norm() <= 1e-13 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn treecode_agrees_with_direct_summation((pos, w) in cloud()) {
        let f = field(pos, w, 0.01);
        let targets: Vec<Vec2> = (0..40).map(|k| Vec2::new(-1.2 + 0.06 * k as f64, 0.3 - 0.02 * k as f64)).collect();
        let tree = velocity_treecode(&f, &targets, 0.3, 8).unwrap();
        prop_assert!(relative_l2_error(&tree.velocities, &velocity_direct(&f, &targets)).unwrap() <= 1e-6);
    }
}

#[test]
fn velocity_is_divergence_free_away_from_blobs() {
    let f = field(
        vec![Vec2::new(0.0, 0.0), Vec2::new(0.4, 0.1), Vec2::new(-0.3, 0.35)],
        vec![1.0, -0.6, 0.8],
        0.05,
    );
    let v = VelocityEvaluator::direct(f);
    let h = 1e-4;
    for p in [Vec2::new(1.0, 0.5), Vec2::new(-0.5, -0.4), Vec2::new(0.2, 0.6), Vec2::new(2.0, -1.0)] {
        let dx = (v.eval_point(p + Vec2::new(h, 0.0)).x1 - v.eval_point(p - Vec2::new(h, 0.0)).x1) / (2.0 * h);
        let dy = (v.eval_point(p + Vec2::new(0.0, h)).x2 - v.eval_point(p - Vec2::new(0.0, h)).x2) / (2.0 * h);
        let scale = v.eval_point(p).norm() / 0.1;
        assert!((dx + dy).abs() <= 1e-4 * scale, "{p:?}: {}", dx + dy);
    }
}

#[test]
fn curl_of_velocity_recovers_vorticity() {
    let spec = InitialVorticitySpec::LambOseen {
        circulation: 1.0,
        core_radius: 0.4,
        center: Vec2::ZERO,
    };
    let f = discretize(&spec, 0.04, 96).unwrap();
    let v = VelocityEvaluator::direct(f.clone());
    let h = 1e-3;
    let peak = eval_vorticity(&f, Vec2::ZERO);
    for p in [Vec2::new(0.1, 0.0), Vec2::new(-0.2, 0.25), Vec2::new(0.45, -0.1)] {
        let dv2 = (v.eval_point(p + Vec2::new(h, 0.0)).x2 - v.eval_point(p - Vec2::new(h, 0.0)).x2) / (2.0 * h);
        let dv1 = (v.eval_point(p + Vec2::new(0.0, h)).x1 - v.eval_point(p - Vec2::new(0.0, h)).x1) / (2.0 * h);
        let curl = dv2 - dv1;
        assert!((curl - eval_vorticity(&f, p)).abs() <= 1e-3 * peak, "{p:?}");
        assert!((curl - spec.eval(p)).abs() <= 0.03 * peak, "{p:?}");
    }
}

#[test]
fn discretized_mass_matches_the_exact_norm() {
    for spec in [
        InitialVorticitySpec::rankine(2.0, 0.5),
        InitialVorticitySpec::sign_changing_pair(1.0, 0.3, 1.0),
    ] {
        let f = discretize(&spec, 0.02, 128).unwrap();
        let exact = spec.exact_l1_norm().unwrap();
        assert!((l1_norm(&f) - exact).abs() <= 0.01 * exact, "{}", spec.kind_name());
    }
}

#[test]
fn velocity_of_an_empty_field_is_zero() {
    let f = VortexBlobField::empty(0.1, MollifierSpec::gaussian()).unwrap();
    assert_eq!(velocity_direct(&f, &[Vec2::new(0.2, 0.1)]), vec![Vec2::ZERO]);
    assert_eq!(l1_norm(&f), 0.0);
}
