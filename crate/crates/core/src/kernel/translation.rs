//! ‖τ_h K − K‖_{L^p} by singularity-adapted quadrature.
//!
//! The integrand |K(x + h) − K(x)|^p has integrable singularities at 0 and
//! −h. Around each of them we integrate in polar coordinates over dyadic
//! rings; the rest of the ball is integrated in polar coordinates about
//! the midpoint −h/2, where the two singular disks B_{|h|/2}(0) and
//! B_{|h|/2}(−h) are exactly the sets r < |h|·|cos θ|.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{kernel_unchecked, INV_2PI};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Radius of the integration ball, centred at the midpoint of the two
    /// singularities. Must be at least 4.
    pub radius: f64,
    /// Gauss-Legendre points per panel.
    pub gauss_order: usize,
    /// Angular panels per quarter turn.
    pub angular_panels: usize,
    /// Rings are added until the innermost ring carries less than this
    /// fraction of the running total.
    pub ring_tolerance: f64,
    pub max_rings: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            radius: 64.0,
            gauss_order: 16,
            angular_panels: 6,
            ring_tolerance: 1e-3,
            max_rings: 400,
        }
    }
}

/// Result of [`kernel_translation_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TranslationNorm {
    /// Approximation of ‖τ_h K − K‖_{L^p(B_R)}.
    pub value: f64,
    /// Upper bound of ∫_{|x|>R} |τ_h K − K|^p.
    pub tail_integral_bound: f64,
    /// Estimated quadrature error of ∫_{B_R} |τ_h K − K|^p.
    pub quadrature_error: f64,
    /// Error estimate transported to the norm, including the tail.
    pub error_estimate: f64,
    /// Dyadic rings used around each singularity.
    pub rings: usize,
}

impl TranslationNorm {
    fn zero() -> Self {
        Self {
            value: 0.0,
            tail_integral_bound: 0.0,
            quadrature_error: 0.0,
            error_estimate: 0.0,
            rings: 0,
        }
    }
}

/// Approximates ‖τ_h K − K‖_{L^p(B_R)} with τ_h K(x) = K(x + h), for
/// 1 < p < 2 and 0 < |h| ≤ 1.
pub fn kernel_translation_norm(h: Vec2, p: f64, quad: &QuadratureSpec) -> Result<TranslationNorm> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::param("p", format!("must lie in (1, 2), got {p}")));
    }
    if !h.is_finite() {
        return Err(Error::NonFinite("translation h"));
    }
    let a = h.norm();
    if a == 0.0 {
        return Ok(TranslationNorm::zero());
    }
    if a > 1.0 {
        return Err(Error::param("h", format!("|h| must be at most 1, got {a}")));
    }
    if !(quad.radius >= 4.0) {
        return Err(Error::param("radius", format!("quadrature ball radius must be ≥ 4, got {}", quad.radius)));
    }
    if quad.gauss_order < 4 || quad.angular_panels == 0 {
        return Err(Error::param("gauss_order", "need at least 4 nodes and one angular panel"));
    }

    let fine = integrate(h, p, quad, quad.gauss_order, quad.angular_panels);
    let coarse = integrate(h, p, quad, quad.gauss_order / 2, quad.angular_panels.div_ceil(2));
    let integral = fine.total();
    let quad_err = (integral - coarse.total()).abs() + fine.core_uncertainty;

    // Tail: for |x − m| > R we have |x| ≥ R − 1/2 and along the segment
    // [x, x + h] the kernel gradient is at most 1/(2π(|x| − 1)²).
    let r = quad.radius;
    let tail = (r / (r - 1.0)) * (2.0 * PI) * INV_2PI.powf(p) * a.powf(p) * (r - 1.0).powf(2.0 - 2.0 * p)
        / (2.0 * p - 2.0);

    let value = integral.powf(1.0 / p);
    let error_estimate = (integral + quad_err + tail).powf(1.0 / p) - value;
    Ok(TranslationNorm {
        value,
        tail_integral_bound: tail,
        quadrature_error: quad_err,
        error_estimate,
        rings: fine.rings,
    })
}

struct Pieces {
    outer: f64,
    disks: f64,
    core: f64,
    core_uncertainty: f64,
    rings: usize,
}

impl Pieces {
    fn total(&self) -> f64 {
        self.outer + self.disks + self.core
    }
}

#[inline]
fn integrand(x: Vec2, h: Vec2, p: f64) -> f64 {
    let xh = x + h;
    if x == Vec2::ZERO || xh == Vec2::ZERO {
        return 0.0;
    }
    (kernel_unchecked(xh) - kernel_unchecked(x)).norm().powf(p)
}

fn integrate(h: Vec2, p: f64, quad: &QuadratureSpec, order: usize, panels_per_quarter: usize) -> Pieces {
    let gl = GaussLegendre::new(order);
    let a = h.norm();
    let e = h / a;
    let ep = e.perp();
    let mid = h * -0.5;
    let at = |origin: Vec2, r: f64, th: f64| origin + e * (r * th.cos()) + ep * (r * th.sin());

    // Angular panels, broken at multiples of π/2 where r₀(θ) = |h||cos θ| has kinks.
    let n_ang = 4 * panels_per_quarter;
    let dth = 2.0 * PI / n_ang as f64;

    // Outer region: polar about the midpoint, r from |h||cos θ| to R.
    let mut outer = 0.0;
    for k in 0..n_ang {
        let (t0, t1) = (k as f64 * dth - PI, (k + 1) as f64 * dth - PI);
        for (th, wt) in gl.mapped(t0, t1) {
            let r0 = a * th.cos().abs();
            let mut breaks = vec![r0];
            let mut b = a / 64.0;
            while b < quad.radius {
                if b > r0 * (1.0 + 1e-12) {
                    breaks.push(b);
                }
                b *= 2.0;
            }
            breaks.push(quad.radius);
            let mut line = 0.0;
            for w in breaks.windows(2) {
                line += gl.integrate(w[0], w[1], |r| integrand(at(mid, r, th), h, p) * r);
            }
            outer += wt * line;
        }
    }

    // Singular disks of radius |h|/2 about 0 and −h: dyadic rings.
    let mut disks = 0.0;
    let mut core = 0.0;
    let mut rings_used = 0;
    for center in [Vec2::ZERO, -h] {
        let mut hi = 0.5 * a;
        let mut total = 0.0;
        let mut rings = 0;
        loop {
            let lo = 0.5 * hi;
            let mut ring = 0.0;
            for k in 0..n_ang {
                let (t0, t1) = (k as f64 * dth, (k + 1) as f64 * dth);
                for (th, wt) in gl.mapped(t0, t1) {
                    ring += wt * gl.integrate(lo, hi, |r| integrand(at(center, r, th), h, p) * r);
                }
            }
            total += ring;
            rings += 1;
            hi = lo;
            if ring < quad.ring_tolerance * total || rings >= quad.max_rings {
                break;
            }
        }
        disks += total;
        // Remaining disk B_hi: |K(x + h) − K(x)| = |K(x)|(1 + O(|x|/|h|)),
        // and the first-order term averages out over the circle.
        core += (2.0 * PI) * INV_2PI.powf(p) * hi.powf(2.0 - p) / (2.0 - p);
        rings_used = rings_used.max(rings);
    }
    let rel = (2.0 * (0.5f64).powi(rings_used as i32)).powi(2);
    Pieces {
        outer,
        disks,
        core,
        core_uncertainty: core * rel.max(1e-12) * 10.0,
        rings: rings_used,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_translation_is_exactly_zero() {
        let n = kernel_translation_norm(Vec2::ZERO, 1.5, &QuadratureSpec::default()).unwrap();
        assert_eq!(n.value, 0.0);
    }

    #[test]
    fn rejects_p_outside_range() {
        let q = QuadratureSpec::default();
        assert!(kernel_translation_norm(Vec2::new(0.1, 0.0), 2.0, &q).is_err());
        assert!(kernel_translation_norm(Vec2::new(0.1, 0.0), 1.0, &q).is_err());
        assert!(kernel_translation_norm(Vec2::new(2.0, 0.0), 1.5, &q).is_err());
        let small = QuadratureSpec { radius: 3.0, ..q };
        assert!(kernel_translation_norm(Vec2::new(0.1, 0.0), 1.5, &small).is_err());
    }

    #[test]
    fn rotation_invariant() {
        let q = QuadratureSpec::default();
        let a = kernel_translation_norm(Vec2::new(0.25, 0.0), 1.5, &q).unwrap();
        let b = kernel_translation_norm(Vec2::new(0.0, -0.25), 1.5, &q).unwrap();
        let c = kernel_translation_norm(Vec2::new(0.25, 0.25) * (0.5f64.sqrt()), 1.5, &q).unwrap();
        assert!((a.value - b.value).abs() < 1e-9 * a.value);
        assert!((a.value - c.value).abs() < 1e-6 * a.value);
    }

    #[test]
    fn slope_at_three_halves_is_one_third() {
        let q = QuadratureSpec::default();
        let (mut xs, mut ys) = (vec![], vec![]);
        for k in 3..=7 {
            let hh = 0.5f64.powi(k);
            let n = kernel_translation_norm(Vec2::new(hh, 0.0), 1.5, &q).unwrap();
            assert!(n.error_estimate < 0.1 * n.value);
            xs.push(hh.ln());
            ys.push(n.value.ln());
        }
        let slope = crate::experiments::least_squares_slope(&xs, &ys).unwrap();
        assert!(slope >= 1.0 / 3.0 * 0.9 && slope <= 1.0 / 3.0 * 1.1, "slope {slope}");
    }
}
