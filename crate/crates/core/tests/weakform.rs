use l1euler::field::{discretize, InitialVorticitySpec, VelocityMethod, VortexBlobField};
use l1euler::flow::{integrate_flow, FlowConfig, Labels};
use l1euler::kernel::{barh_phi, h_phi};
use l1euler::weakform::*;
use l1euler::Vec2;
use proptest::prelude::*;

#[test]
fn steady_solution_residuals_stay_within_their_estimates() {
    let spec = InitialVorticitySpec::rankine(1.0, 1.0);
    let f0 = discretize(&spec, 0.05, 40).unwrap();
    let flow = integrate_flow(&f0, 0.5, &FlowConfig::new(5e-3), Labels::scattered(Vec::new())).unwrap();
    let run = BlobRun::from_flow(&flow).unwrap();
    let psi = make_bump(Vec2::new(0.5, 0.4), 1.0, 0.5).unwrap();
    let phi = divfree_from_stream(psi.clone());
    let reports = [
        renormalized_residual(&flow, &spec, Nonlinearity::Arctan, &psi).unwrap(),
        symmetrized_vorticity_residual(&run, &psi, &f0).unwrap(),
        symmetrized_velocity_residual(&run, &phi).unwrap(),
        weak_velocity_residual(&run, &phi).unwrap(),
    ];
    for r in &reports {
        assert!(r.residual.abs() <= r.quadrature_error_estimate, "{r:?}");
        assert!(r.relative() <= 1e-2, "{r:?}");
    }
}

#[test]
fn zero_solution_has_exactly_zero_residuals() {
    let empty = discretize(&InitialVorticitySpec::rankine(0.0, 1.0), 0.1, 16).unwrap();
    assert!(empty.is_empty());
    let run = BlobRun::steady(empty.clone(), vec![0.0, 0.25, 0.5], VelocityMethod::Direct).unwrap();
    let psi = make_bump(Vec2::ZERO, 1.0, 0.5).unwrap();
    let phi = divfree_from_stream(psi.clone());
    assert_eq!(symmetrized_vorticity_residual(&run, &psi, &empty).unwrap().residual, 0.0);
    assert_eq!(symmetrized_velocity_residual(&run, &phi).unwrap().residual, 0.0);
    assert_eq!(weak_velocity_residual(&run, &phi).unwrap().residual, 0.0);
}

#[test]
fn residuals_are_linear_in_the_test_function() {
    let f0 = discretize(&InitialVorticitySpec::sign_changing_pair(1.0, 0.4, 1.0), 0.1, 24).unwrap();
    let flow = integrate_flow(&f0, 0.2, &FlowConfig::new(0.02), Labels::scattered(Vec::new())).unwrap();
    let run = BlobRun::from_flow(&flow).unwrap();
    let a = make_bump(Vec2::new(0.3, 0.1), 0.8, 0.2).unwrap();
    let b = make_bump(Vec2::new(-0.4, 0.0), 0.6, 0.2).unwrap();
    let ab = a.combine(2.0, &b, -0.5);
    let r = |psi: &ScalarTest| symmetrized_vorticity_residual(&run, psi, &f0).unwrap().residual;
    let (ra, rb, rab) = (r(&a), r(&b), r(&ab));
    assert!((rab - (2.0 * ra - 0.5 * rb)).abs() <= 1e-12 * (ra.abs() + rb.abs() + 1e-30));
}

#[test]
fn identity_gap_of_an_isolated_blob_vanishes() {
    let f = VortexBlobField::new(vec![Vec2::new(0.2, 0.1)], vec![1.0], 0.05, Default::default()).unwrap();
    let phi = divfree_from_stream(make_steady_bump(Vec2::ZERO, 1.0).unwrap());
    let gap = sym_weak_identity_gap(&f, &phi).unwrap();
    assert_eq!(gap.pair_side, 0.0);
}

proptest! {
    #[test]
    fn stream_and_velocity_kernels_coincide(
        t in 0.0..1.0f64,
        x1 in -1.2..1.2f64, x2 in -1.2..1.2f64,
        y1 in -1.2..1.2f64, y2 in -1.2..1.2f64,
    ) {
        let psi = make_bump(Vec2::new(0.1, 0.0), 1.0, 1.0).unwrap();
        let phi = divfree_from_stream(psi.clone());
        let (x, y) = (Vec2::new(x1, x2), Vec2::new(y1, y2));
        prop_assert!((barh_phi(&phi, t, x, y) - h_phi(&psi, t, x, y)).abs() <= 1e-12);
    }
}
