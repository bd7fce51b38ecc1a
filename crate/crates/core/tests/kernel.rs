use l1euler::kernel::*;
use l1euler::Vec2;

#[test]
fn translation_constant_is_stable_across_scales() {
    let quad = QuadratureSpec::default();
    for p in [4.0 / 3.0, 1.5, 5.0 / 3.0] {
        let alpha = 2.0 / p - 1.0;
        let c = |h: f64| kernel_translation_norm(Vec2::new(h, 0.0), p, &quad).unwrap().value / h.powf(alpha);
        let coarse = 0.5 * (c(0.125) + c(0.0625));
        let fine = 0.5 * (c(1.0 / 128.0) + c(1.0 / 256.0));
        assert!((coarse - fine).abs() <= 0.2 * fine, "p={p}: {coarse} vs {fine}");
    }
}

#[test]
fn translation_norm_depends_only_on_the_length_of_h() {
    let quad = QuadratureSpec::default();
    let a = kernel_translation_norm(Vec2::new(0.1, 0.0), 1.5, &quad).unwrap().value;
    let b = kernel_translation_norm(Vec2::new(0.06, -0.08), 1.5, &quad).unwrap().value;
    assert!((a - b).abs() <= 1e-3 * a, "{a} {b}");
}

#[test]
fn kernel_decays_like_one_over_distance() {
    for r in [0.1, 1.0, 10.0] {
        let k = eval_kernel(Vec2::new(0.6 * r, 0.8 * r)).unwrap();
        assert!((k.norm() * 2.0 * std::f64::consts::PI * r - 1.0).abs() < 1e-14);
        assert!(k.dot(Vec2::new(0.6, 0.8)).abs() < 1e-15);
    }
}
