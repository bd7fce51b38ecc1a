//! Radial mollifiers ρ with ∫ρ = 1 and the induced blob kernels
//! K_ε = K ∗ ρ_ε = K · M(|x|/ε), M the radial mass fraction of ρ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierProfile {
    /// ρ(x) = e^{−|x|²/2} / 2π. Not compactly supported.
    Gaussian,
    /// ρ(x) = C e^{−1/(1−|x|²)} on the unit ball.
    CompactBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub profile: MollifierProfile,
    /// The constant C making ∫ρ = 1.
    pub normalization: f64,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        Self::gaussian()
    }
}

impl MollifierSpec {
    pub fn gaussian() -> Self {
        Self {
            profile: MollifierProfile::Gaussian,
            normalization: 0.5 / PI,
        }
    }

    pub fn compact_bump() -> Self {
        Self {
            profile: MollifierProfile::CompactBump,
            normalization: 1.0 / (PI * bump_antiderivative(1.0)),
        }
    }

    pub fn from_profile(profile: MollifierProfile) -> Self {
        match profile {
            MollifierProfile::Gaussian => Self::gaussian(),
            MollifierProfile::CompactBump => Self::compact_bump(),
        }
    }

    pub fn is_compactly_supported(&self) -> bool {
        matches!(self.profile, MollifierProfile::CompactBump)
    }

    /// ρ at unit scale, as a function of |x|².
    #[inline]
    pub fn density_unit(&self, r2: f64) -> f64 {
        match self.profile {
            MollifierProfile::Gaussian => self.normalization * (-0.5 * r2).exp(),
            MollifierProfile::CompactBump => {
                if r2 >= 1.0 {
                    0.0
                } else {
                    self.normalization * (-1.0 / (1.0 - r2)).exp()
                }
            }
        }
    }

    /// ρ_ε(x) = ε⁻² ρ(x/ε), as a function of |x|².
    #[inline]
    pub fn density(&self, r2: f64, eps: f64) -> f64 {
        self.density_unit(r2 / (eps * eps)) / (eps * eps)
    }

    /// Fraction of the mass of ρ_ε inside B_r, as a function of r²: the
    /// factor turning K into the blob kernel K_ε.
    #[inline]
    pub fn mass_fraction(&self, r2: f64, eps: f64) -> f64 {
        let s2 = r2 / (eps * eps);
        match self.profile {
            MollifierProfile::Gaussian => one_minus_exp_neg(0.5 * s2),
            MollifierProfile::CompactBump => {
                if s2 >= 1.0 {
                    1.0
                } else {
                    1.0 - bump_antiderivative(1.0 - s2) / bump_antiderivative(1.0)
                }
            }
        }
    }

    /// Radius beyond which K_ε = K to double precision.
    pub fn far_cutoff(&self, eps: f64) -> f64 {
        match self.profile {
            MollifierProfile::Gaussian => 9.0 * eps,
            MollifierProfile::CompactBump => eps,
        }
    }

    /// Radius beyond which 1 − M(|x|/ε) < `tol`, so that replacing K_ε by
    /// K there changes each pair interaction by a relative `tol` at most.
    pub fn kernel_cutoff(&self, eps: f64, tol: f64) -> f64 {
        match self.profile {
            MollifierProfile::Gaussian => {
                let tol = tol.clamp(1e-300, 0.5);
                (eps * (2.0 * (1.0 / tol).ln()).sqrt()).min(self.far_cutoff(eps))
            }
            MollifierProfile::CompactBump => eps,
        }
    }

    /// Radius beyond which ρ_ε is negligible (zero for the bump).
    pub fn support_radius(&self, eps: f64) -> f64 {
        match self.profile {
            // e^{-r²/2ε²} < 1e-16 beyond 8.6ε
            MollifierProfile::Gaussian => 8.6 * eps,
            MollifierProfile::CompactBump => eps,
        }
    }

    /// Blob kernel K_ε(d) for d = x − xᵢ; zero at d = 0.
    #[inline]
    pub fn blob_kernel(&self, d: crate::Vec2, eps: f64) -> crate::Vec2 {
        let r2 = d.norm_sq();
        if r2 == 0.0 {
            return crate::Vec2::ZERO;
        }
        let m = if r2 >= self.far_cutoff(eps).powi(2) {
            1.0
        } else {
            self.mass_fraction(r2, eps)
        };
        d.perp() * (crate::kernel::INV_2PI * m / r2)
    }
}

/// 1 − e^{−a} for a ≥ 0. `expm1` costs about three `exp` calls, so it
/// is kept to the range where cancellation matters.
#[inline]
pub(crate) fn one_minus_exp_neg(a: f64) -> f64 {
    if a < 0.5 {
        -(-a).exp_m1()
    } else {
        1.0 - (-a).exp()
    }
}

/// F(v) = ∫₀^v e^{−1/s} ds = v e^{−1/v} − E₁(1/v), for 0 ≤ v ≤ 1.
fn bump_antiderivative(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let z = 1.0 / v;
    v * (-z).exp() - exp_integral_e1(z)
}

/// E₁(z) for z ≥ 1 by the modified Lentz continued fraction.
fn exp_integral_e1(z: f64) -> f64 {
    debug_assert!(z >= 1.0);
    if z > 700.0 {
        return 0.0;
    }
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    fn radial_mass(m: &MollifierSpec, outer: f64) -> f64 {
        // ∫ρ = 2π ∫ ρ(r) r dr, composite Gauss-Legendre.
        let gl = GaussLegendre::new(20);
        let panels = 400;
        let dr = outer / panels as f64;
        (0..panels)
            .map(|k| gl.integrate(k as f64 * dr, (k + 1) as f64 * dr, |r| 2.0 * PI * r * m.density_unit(r * r)))
            .sum()
    }

    #[test]
    fn mollifiers_have_unit_mass() {
        let g = MollifierSpec::gaussian();
        assert!((radial_mass(&g, 40.0) - 1.0).abs() < 1e-8);
        let b = MollifierSpec::compact_bump();
        assert!((radial_mass(&b, 1.0) - 1.0).abs() < 1e-8);
        assert!((b.normalization - 2.1435).abs() < 1e-3);
    }

    #[test]
    fn e1_reference_values() {
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_27).abs() < 1e-14);
        assert!((exp_integral_e1(5.0) - 0.001_148_295_591_275_325_6).abs() < 1e-16);
    }

    #[test]
    fn mass_fraction_matches_quadrature() {
        let gl = GaussLegendre::new(24);
        for m in [MollifierSpec::gaussian(), MollifierSpec::compact_bump()] {
            for &s in &[0.1, 0.35, 0.7, 0.95, 1.5, 3.0] {
                let panels = 200;
                let ds = s / panels as f64;
                let q: f64 = (0..panels)
                    .map(|k| gl.integrate(k as f64 * ds, (k + 1) as f64 * ds, |r| 2.0 * PI * r * m.density_unit(r * r)))
                    .sum();
                assert!((m.mass_fraction(s * s, 1.0) - q).abs() < 1e-10, "{m:?} s={s}");
            }
        }
    }

    #[test]
    fn swirl_factor_is_accurate_across_branch() {
        for a in [1e-20, 1e-8, 0.3, 0.499_999, 0.5, 0.7, 3.0, 40.0] {
            let reference = -(-a as f64).exp_m1();
            assert!((one_minus_exp_neg(a) - reference).abs() <= 2e-16 * reference);
        }
    }

    #[test]
    fn gaussian_density_at_origin() {
        let g = MollifierSpec::gaussian();
        let eps = 0.05;
        assert!((g.density(0.0, eps) - 1.0 / (2.0 * PI * eps * eps)).abs() < 1e-9);
    }

    #[test]
    fn blob_kernel_reduces_to_kernel_far_away() {
        for m in [MollifierSpec::gaussian(), MollifierSpec::compact_bump()] {
            let d = crate::Vec2::new(1.0, 0.0);
            let k = m.blob_kernel(d, 0.01);
            assert_eq!(k, crate::kernel::eval_kernel(d).unwrap());
            assert_eq!(m.blob_kernel(crate::Vec2::ZERO, 0.01), crate::Vec2::ZERO);
        }
    }
}
