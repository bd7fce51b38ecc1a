//! The Biot-Savart kernel K(x) = x^⊥ / (2π|x|²) and the bounded kernels
//! obtained by symmetrizing the nonlinear term against test functions.

mod translation;

use std::f64::consts::PI;

pub use translation::{kernel_translation_norm, QuadratureSpec, TranslationNorm};

use crate::weakform::{ScalarTestFunction, VectorTestFunction};
use crate::{Error, Result, Vec2};

pub(crate) const INV_2PI: f64 = 0.5 / PI;

/// K(x) without the origin check; callers guarantee `x ≠ 0`.
#[inline]
pub(crate) fn kernel_unchecked(x: Vec2) -> Vec2 {
    x.perp() * (INV_2PI / x.norm_sq())
}

/// Biot-Savart kernel K(x) = (1/2π)(−x₂, x₁)/|x|².
pub fn eval_kernel(x: Vec2) -> Result<Vec2> {
    if !x.is_finite() {
        return Err(Error::NonFinite("kernel argument"));
    }
    if x == Vec2::ZERO {
        return Err(Error::KernelSingularity);
    }
    Ok(kernel_unchecked(x))
}

/// K restricted to the closed ball B_radius(0) and to its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSplit {
    pub near: Vec2,
    pub far: Vec2,
    pub radius: f64,
}

/// Splits K(x) = K·1_{|x| ≤ radius} + K·1_{|x| > radius}.
pub fn split_kernel(x: Vec2, radius: f64) -> Result<KernelSplit> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    let k = eval_kernel(x)?;
    let (near, far) = if x.norm_sq() <= radius * radius {
        (k, Vec2::ZERO)
    } else {
        (Vec2::ZERO, k)
    };
    Ok(KernelSplit { near, far, radius })
}

/// H_φ(t, x, y) = −½ K(x − y)·(∇φ(t, x) − ∇φ(t, y)), zero on the diagonal.
pub fn h_phi(phi: &impl ScalarTestFunction, t: f64, x: Vec2, y: Vec2) -> f64 {
    if x == y {
        return 0.0;
    }
    let dg = phi.gradient(t, x) - phi.gradient(t, y);
    h_from_gradients(x - y, dg)
}

/// H̄_φ(t, x, y) = ½ K(x − y)^⊥·(φ(t, x) − φ(t, y)), zero on the diagonal.
pub fn barh_phi(phi: &impl VectorTestFunction, t: f64, x: Vec2, y: Vec2) -> f64 {
    if x == y {
        return 0.0;
    }
    let dv = phi.value(t, x) - phi.value(t, y);
    barh_from_values(x - y, dv)
}

/// H_φ given `x − y` and the gradient difference; used by the pair sums
/// where gradients are precomputed per particle.
#[inline]
pub(crate) fn h_from_gradients(d: Vec2, dgrad: Vec2) -> f64 {
    let r2 = d.norm_sq();
    if r2 == 0.0 {
        return 0.0;
    }
    -0.5 * INV_2PI * d.perp().dot(dgrad) / r2
}

#[inline]
pub(crate) fn barh_from_values(d: Vec2, dval: Vec2) -> f64 {
    let r2 = d.norm_sq();
    if r2 == 0.0 {
        return 0.0;
    }
    0.5 * INV_2PI * d.perp().perp().dot(dval) / r2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weakform::{divfree_from_stream, make_bump, Mat2, Support};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_examples() {
        let k = eval_kernel(Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(k.x1, 0.0);
        assert!((k.x2 - 0.159_154_943_091_895_34).abs() < 1e-16);
        let k = eval_kernel(Vec2::new(0.0, 2.0)).unwrap();
        assert!((k.x1 + 1.0 / (4.0 * PI)).abs() < 1e-16 && k.x2 == 0.0);
        let k = eval_kernel(Vec2::new(-1.0, 0.0)).unwrap();
        assert!((k.x2 + 1.0 / (2.0 * PI)).abs() < 1e-16);
        assert!(matches!(eval_kernel(Vec2::ZERO), Err(Error::KernelSingularity)));
        assert!(eval_kernel(Vec2::new(f64::NAN, 1.0)).is_err());
    }

    #[test]
    fn split_examples() {
        let s = split_kernel(Vec2::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(s.near, Vec2::new(0.0, 1.0 / (2.0 * PI)));
        assert_eq!(s.far, Vec2::ZERO);
        let s = split_kernel(Vec2::new(3.0, 0.0), 1.0).unwrap();
        assert_eq!(s.near, Vec2::ZERO);
        assert!((s.far.x2 - 1.0 / (6.0 * PI)).abs() < 1e-16);
        let s = split_kernel(Vec2::new(0.5, 0.0), 1.0).unwrap();
        assert!((s.near.x2 - 1.0 / PI).abs() < 1e-15);
        assert_eq!(s.far, Vec2::ZERO);
        assert!(split_kernel(Vec2::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn kernel_is_divergence_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-5;
        for _ in 0..1000 {
            let x = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            if x.norm() < 0.1 {
                continue;
            }
            let d1 = (kernel_unchecked(x + Vec2::new(h, 0.0)).x1
                - kernel_unchecked(x - Vec2::new(h, 0.0)).x1)
                / (2.0 * h);
            let d2 = (kernel_unchecked(x + Vec2::new(0.0, h)).x2
                - kernel_unchecked(x - Vec2::new(0.0, h)).x2)
                / (2.0 * h);
            assert!((d1 + d2).abs() <= 1e-6 * x.norm().powi(-3));
        }
    }

    proptest! {
        #[test]
        fn antisymmetry(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            prop_assume!(a != 0.0 || b != 0.0);
            let x = Vec2::new(a, b);
            prop_assert_eq!(eval_kernel(-x).unwrap(), -eval_kernel(x).unwrap());
        }

        #[test]
        fn split_reassembles(a in -5f64..5.0, b in -5f64..5.0, r in 0.01f64..4.0) {
            prop_assume!(a != 0.0 || b != 0.0);
            let x = Vec2::new(a, b);
            let s = split_kernel(x, r).unwrap();
            prop_assert_eq!(s.near + s.far, eval_kernel(x).unwrap());
            prop_assert!(s.near == Vec2::ZERO || s.far == Vec2::ZERO);
        }
    }

    struct Linear;
    impl ScalarTestFunction for Linear {
        fn value(&self, _: f64, x: Vec2) -> f64 {
            2.0 * x.x1 - x.x2
        }
        fn time_derivative(&self, _: f64, _: Vec2) -> f64 {
            0.0
        }
        fn gradient(&self, _: f64, _: Vec2) -> Vec2 {
            Vec2::new(2.0, -1.0)
        }
        fn gradient_time_derivative(&self, _: f64, _: Vec2) -> Vec2 {
            Vec2::ZERO
        }
        fn hessian(&self, _: f64, _: Vec2) -> Mat2 {
            [[0.0; 2]; 2]
        }
        fn support(&self) -> Support {
            Support { center: Vec2::ZERO, radius: f64::INFINITY }
        }
        fn lip(&self, _: f64) -> f64 {
            5f64.sqrt()
        }
        fn lip_gradient(&self, _: f64) -> f64 {
            0.0
        }
        fn sup_abs(&self, _: f64) -> f64 {
            f64::INFINITY
        }
        fn sup_time_derivative(&self) -> f64 {
            0.0
        }
        fn sup_gradient_time_derivative(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn h_phi_vanishes_for_linear_phi_and_on_diagonal() {
        assert_eq!(h_phi(&Linear, 0.0, Vec2::new(0.1, 0.2), Vec2::new(-0.4, 0.3)), 0.0);
        let phi = make_bump(Vec2::ZERO, 1.0, 1.0).unwrap();
        let p = Vec2::new(0.3, -0.1);
        assert_eq!(h_phi(&phi, 0.2, p, p), 0.0);
        assert_eq!(barh_phi(&divfree_from_stream(phi), 0.2, p, p), 0.0);
    }

    #[test]
    fn h_bounds_and_symmetry_on_random_pairs() {
        let psi = make_bump(Vec2::new(0.2, 0.1), 0.9, 2.0).unwrap();
        let phi = divfree_from_stream(psi.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100_000 {
            let t = rng.gen_range(0.0..2.0);
            let x = Vec2::new(rng.gen_range(-1.0..1.4), rng.gen_range(-1.0..1.2));
            let y = x + Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let h = h_phi(&psi, t, x, y);
            let hb = barh_phi(&phi, t, x, y);
            assert!(h.abs() <= psi.lip_gradient(t) / (4.0 * PI) * (1.0 + 1e-12));
            assert!(hb.abs() <= phi.lip(t) / (4.0 * PI) * (1.0 + 1e-12));
            assert!((h - h_phi(&psi, t, y, x)).abs() <= 1e-15 * (1.0 + h.abs()));
            assert!((hb - barh_phi(&phi, t, y, x)).abs() <= 1e-15 * (1.0 + hb.abs()));
        }
    }

    #[test]
    fn barh_vanishes_where_phi_is_constant() {
        let phi = divfree_from_stream(make_bump(Vec2::ZERO, 1.0, 1.0).unwrap());
        // Both points outside the support: φ = 0 at both.
        assert_eq!(barh_phi(&phi, 0.0, Vec2::new(2.0, 0.0), Vec2::new(3.0, 1.0)), 0.0);
    }
}
