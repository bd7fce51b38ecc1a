//! Compactly supported test functions.
//!
//! Scalar test functions are finite sums of smooth radial bumps
//! `q(t) · exp(1 − 1/(1 − |x − c|²/R²))`; divergence-free vector test
//! functions are built from a scalar stream function as `−∇^⊥ψ`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec2};

/// 2×2 matrix, `m[i][j]`.
pub type Mat2 = [[f64; 2]; 2];

/// A ball containing the support of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub center: Vec2,
    pub radius: f64,
}

impl Support {
    pub fn contains(&self, x: Vec2) -> bool {
        (x - self.center).norm_sq() < self.radius * self.radius
    }
}

/// A C² scalar test function φ(t, x), compactly supported in x.
pub trait ScalarTestFunction: Sync {
    fn value(&self, t: f64, x: Vec2) -> f64;
    fn time_derivative(&self, t: f64, x: Vec2) -> f64;
    fn gradient(&self, t: f64, x: Vec2) -> Vec2;
    /// ∂ₜ∇φ.
    fn gradient_time_derivative(&self, t: f64, x: Vec2) -> Vec2;
    fn hessian(&self, t: f64, x: Vec2) -> Mat2;
    fn support(&self) -> Support;
    /// Upper bound on Lip(φ(t, ·)) = sup |∇φ(t, ·)|.
    fn lip(&self, t: f64) -> f64;
    /// Upper bound on Lip(∇φ(t, ·)).
    fn lip_gradient(&self, t: f64) -> f64;
    /// Upper bound on sup |φ(t, ·)|.
    fn sup_abs(&self, t: f64) -> f64;
    /// Upper bound on sup |∂ₜφ| over all times.
    fn sup_time_derivative(&self) -> f64;
    /// Upper bound on sup |∂ₜ∇φ| over all times.
    fn sup_gradient_time_derivative(&self) -> f64;
}

/// A C¹ vector test function φ(t, x), compactly supported in x.
pub trait VectorTestFunction: Sync {
    fn value(&self, t: f64, x: Vec2) -> Vec2;
    fn time_derivative(&self, t: f64, x: Vec2) -> Vec2;
    /// `J[i][j] = ∂ⱼ φᵢ`.
    fn jacobian(&self, t: f64, x: Vec2) -> Mat2;
    fn support(&self) -> Support;
    /// Upper bound on Lip(φ(t, ·)).
    fn lip(&self, t: f64) -> f64;
    fn sup_abs(&self, t: f64) -> f64;
    fn sup_time_derivative(&self) -> f64;

    fn divergence(&self, t: f64, x: Vec2) -> f64 {
        let j = self.jacobian(t, x);
        j[0][0] + j[1][1]
    }

    /// (ψ, ∂ₜψ) at (t, x) when φ = −∇^⊥ψ with ψ known.
    fn stream(&self, _t: f64, _x: Vec2) -> Option<(f64, f64)> {
        None
    }
}

/// Time factor q(t) of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// q ≡ 1. Residuals then carry an explicit final-time term.
    Constant,
    /// q(t) = 1 − S(t / t_end) with S the quintic smoothstep
    /// 6s⁵ − 15s⁴ + 10s³: q(0) = 1, q = 0 for t ≥ t_end, C² across both ends.
    SmoothCutoff { t_end: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::SmoothCutoff { t_end } => {
                let s = (t / t_end).clamp(0.0, 1.0);
                1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 0.0,
            TimeProfile::SmoothCutoff { t_end } => {
                let s = t / t_end;
                if !(0.0..=1.0).contains(&s) {
                    return 0.0;
                }
                let om = 1.0 - s;
                -30.0 * s * s * om * om / t_end
            }
        }
    }

    pub fn sup_derivative(&self) -> f64 {
        match *self {
            TimeProfile::Constant => 0.0,
            TimeProfile::SmoothCutoff { t_end } => 30.0 / 16.0 / t_end,
        }
    }

    /// Whether q vanishes at `t` (no final-time term in the weak form).
    pub fn vanishes_at(&self, t: f64) -> bool {
        self.value(t) == 0.0
    }
}

/// Single radial bump `amplitude · q(t) · b(|x − c|² / R²)` with
/// `b(u) = exp(1 − 1/(1 − u))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec2,
    pub radius: f64,
    pub amplitude: f64,
    pub time: TimeProfile,
    /// sup |∇b| at unit amplitude, in x-units.
    pub lip_constant: f64,
    /// sup ‖∇²b‖ at unit amplitude.
    pub lip_gradient_constant: f64,
}

impl Bump {
    pub fn new(center: Vec2, radius: f64, amplitude: f64, time: TimeProfile) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", format!("must be positive, got {radius}")));
        }
        if !center.is_finite() || !amplitude.is_finite() {
            return Err(Error::NonFinite("bump parameters"));
        }
        if let TimeProfile::SmoothCutoff { t_end } = time {
            if !(t_end > 0.0) {
                return Err(Error::param("t_end", format!("must be positive, got {t_end}")));
            }
        }
        let (g, h) = unit_bump_lipschitz();
        Ok(Self {
            center,
            radius,
            amplitude,
            time,
            lip_constant: g / radius,
            lip_gradient_constant: h / (radius * radius),
        })
    }

    #[inline]
    fn profile(&self, x: Vec2) -> Option<(Vec2, f64, f64, f64, f64)> {
        let d = x - self.center;
        let r2 = self.radius * self.radius;
        let u = d.norm_sq() / r2;
        if u >= 1.0 {
            return None;
        }
        let s = 1.0 / (1.0 - u);
        let b = (1.0 - s).exp();
        let db = -s * s * b;
        let d2b = b * (s * s * s * s - 2.0 * s * s * s);
        Some((d, r2, b, db, d2b))
    }
}

impl ScalarTestFunction for Bump {
    fn value(&self, t: f64, x: Vec2) -> f64 {
        match self.profile(x) {
            Some((_, _, b, _, _)) => self.amplitude * self.time.value(t) * b,
            None => 0.0,
        }
    }

    fn time_derivative(&self, t: f64, x: Vec2) -> f64 {
        match self.profile(x) {
            Some((_, _, b, _, _)) => self.amplitude * self.time.derivative(t) * b,
            None => 0.0,
        }
    }

    fn gradient(&self, t: f64, x: Vec2) -> Vec2 {
        match self.profile(x) {
            Some((d, r2, _, db, _)) => d * (self.amplitude * self.time.value(t) * db * 2.0 / r2),
            None => Vec2::ZERO,
        }
    }

    fn gradient_time_derivative(&self, t: f64, x: Vec2) -> Vec2 {
        match self.profile(x) {
            Some((d, r2, _, db, _)) => {
                d * (self.amplitude * self.time.derivative(t) * db * 2.0 / r2)
            }
            None => Vec2::ZERO,
        }
    }

    fn hessian(&self, t: f64, x: Vec2) -> Mat2 {
        match self.profile(x) {
            Some((d, r2, _, db, d2b)) => {
                let a = self.amplitude * self.time.value(t);
                let c = a * d2b * 4.0 / (r2 * r2);
                let diag = a * db * 2.0 / r2;
                [
                    [c * d.x1 * d.x1 + diag, c * d.x1 * d.x2],
                    [c * d.x1 * d.x2, c * d.x2 * d.x2 + diag],
                ]
            }
            None => [[0.0; 2]; 2],
        }
    }

    fn support(&self) -> Support {
        Support {
            center: self.center,
            radius: self.radius,
        }
    }

    fn lip(&self, t: f64) -> f64 {
        (self.amplitude * self.time.value(t)).abs() * self.lip_constant
    }

    fn lip_gradient(&self, t: f64) -> f64 {
        (self.amplitude * self.time.value(t)).abs() * self.lip_gradient_constant
    }

    fn sup_abs(&self, t: f64) -> f64 {
        (self.amplitude * self.time.value(t)).abs()
    }

    fn sup_time_derivative(&self) -> f64 {
        self.amplitude.abs() * self.time.sup_derivative()
    }

    fn sup_gradient_time_derivative(&self) -> f64 {
        self.amplitude.abs() * self.time.sup_derivative() * self.lip_constant
    }
}

/// sup over ρ ∈ [0, 1) of |d/dρ b(ρ²)| and of the Hessian operator norm of
/// x ↦ b(|x|²), for the unit-radius bump.
fn unit_bump_lipschitz() -> (f64, f64) {
    fn grad(rho: f64) -> f64 {
        let u = rho * rho;
        if u >= 1.0 {
            return 0.0;
        }
        let s = 1.0 / (1.0 - u);
        let b = (1.0 - s).exp();
        (s * s * b * 2.0 * rho).abs()
    }
    fn hess(rho: f64) -> f64 {
        let u = rho * rho;
        if u >= 1.0 {
            return 0.0;
        }
        let s = 1.0 / (1.0 - u);
        let b = (1.0 - s).exp();
        let db = -s * s * b;
        let d2b = b * (s.powi(4) - 2.0 * s.powi(3));
        let radial = 4.0 * u * d2b + 2.0 * db;
        let tangential = 2.0 * db;
        radial.abs().max(tangential.abs())
    }
    let g = maximize_on_unit(grad);
    let h = maximize_on_unit(hess);
    // Margin for the refinement tolerance.
    (g * (1.0 + 1e-9), h * (1.0 + 1e-9))
}

fn maximize_on_unit(f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 4000;
    let step = 1.0 / N as f64;
    let (mut best_i, mut best) = (0, f(0.0));
    for i in 1..N {
        let v = f(i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    // Golden-section refinement around the best sample.
    let (mut a, mut b) = (
        (best_i as f64 - 1.0).max(0.0) * step,
        ((best_i + 1) as f64 * step).min(1.0),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b)))
}

/// A finite linear combination of bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarTest {
    pub terms: Vec<Bump>,
}

impl ScalarTest {
    pub fn single(bump: Bump) -> Self {
        Self { terms: vec![bump] }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &ScalarTest, b: f64) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        terms.extend(self.terms.iter().map(|t| Bump {
            amplitude: t.amplitude * a,
            ..*t
        }));
        terms.extend(other.terms.iter().map(|t| Bump {
            amplitude: t.amplitude * b,
            ..*t
        }));
        Self { terms }
    }
}

impl ScalarTestFunction for ScalarTest {
    fn value(&self, t: f64, x: Vec2) -> f64 {
        self.terms.iter().map(|b| b.value(t, x)).sum()
    }
    fn time_derivative(&self, t: f64, x: Vec2) -> f64 {
        self.terms.iter().map(|b| b.time_derivative(t, x)).sum()
    }
    fn gradient(&self, t: f64, x: Vec2) -> Vec2 {
        self.terms.iter().fold(Vec2::ZERO, |a, b| a + b.gradient(t, x))
    }
    fn gradient_time_derivative(&self, t: f64, x: Vec2) -> Vec2 {
        self.terms
            .iter()
            .fold(Vec2::ZERO, |a, b| a + b.gradient_time_derivative(t, x))
    }
    fn hessian(&self, t: f64, x: Vec2) -> Mat2 {
        let mut h = [[0.0; 2]; 2];
        for b in &self.terms {
            let hb = b.hessian(t, x);
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += hb[i][j];
                }
            }
        }
        h
    }
    fn support(&self) -> Support {
        enclosing(self.terms.iter().map(|b| b.support()))
    }
    fn lip(&self, t: f64) -> f64 {
        self.terms.iter().map(|b| b.lip(t)).sum()
    }
    fn lip_gradient(&self, t: f64) -> f64 {
        self.terms.iter().map(|b| b.lip_gradient(t)).sum()
    }
    fn sup_abs(&self, t: f64) -> f64 {
        self.terms.iter().map(|b| b.sup_abs(t)).sum()
    }
    fn sup_time_derivative(&self) -> f64 {
        self.terms.iter().map(|b| b.sup_time_derivative()).sum()
    }
    fn sup_gradient_time_derivative(&self) -> f64 {
        self.terms.iter().map(|b| b.sup_gradient_time_derivative()).sum()
    }
}

fn enclosing(balls: impl Iterator<Item = Support>) -> Support {
    let balls: Vec<Support> = balls.collect();
    if balls.is_empty() {
        return Support {
            center: Vec2::ZERO,
            radius: 0.0,
        };
    }
    let center = balls.iter().fold(Vec2::ZERO, |a, s| a + s.center) / balls.len() as f64;
    let radius = balls
        .iter()
        .map(|s| (s.center - center).norm() + s.radius)
        .fold(0.0, f64::max);
    Support { center, radius }
}

/// Scalar C² bump `q(t) · exp(1 − 1/(1 − |x − c|²/R²))` with the smooth
/// cutoff q vanishing from `t_end` on.
pub fn make_bump(center: Vec2, radius: f64, t_end: f64) -> Result<ScalarTest> {
    Ok(ScalarTest::single(Bump::new(
        center,
        radius,
        1.0,
        TimeProfile::SmoothCutoff { t_end },
    )?))
}

/// Time-independent bump (q ≡ 1).
pub fn make_steady_bump(center: Vec2, radius: f64) -> Result<ScalarTest> {
    Ok(ScalarTest::single(Bump::new(center, radius, 1.0, TimeProfile::Constant)?))
}

/// Divergence-free vector test function `φ̄ = −∇^⊥ψ = (∂₂ψ, −∂₁ψ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivFree<S> {
    pub stream: S,
}

pub fn divfree_from_stream<S: ScalarTestFunction>(psi: S) -> DivFree<S> {
    DivFree { stream: psi }
}

impl<S: ScalarTestFunction> VectorTestFunction for DivFree<S> {
    fn value(&self, t: f64, x: Vec2) -> Vec2 {
        let g = self.stream.gradient(t, x);
        Vec2::new(g.x2, -g.x1)
    }

    fn time_derivative(&self, t: f64, x: Vec2) -> Vec2 {
        let g = self.stream.gradient_time_derivative(t, x);
        Vec2::new(g.x2, -g.x1)
    }

    fn jacobian(&self, t: f64, x: Vec2) -> Mat2 {
        let h = self.stream.hessian(t, x);
        [[h[1][0], h[1][1]], [-h[0][0], -h[0][1]]]
    }

    fn support(&self) -> Support {
        self.stream.support()
    }

    fn lip(&self, t: f64) -> f64 {
        self.stream.lip_gradient(t)
    }

    fn sup_abs(&self, t: f64) -> f64 {
        self.stream.lip(t)
    }

    fn sup_time_derivative(&self) -> f64 {
        self.stream.sup_gradient_time_derivative()
    }

    fn stream(&self, t: f64, x: Vec2) -> Option<(f64, f64)> {
        Some((self.stream.value(t, x), self.stream.time_derivative(t, x)))
    }
}
