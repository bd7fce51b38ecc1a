use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A point or vector of the plane.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x1: f64,
    pub x2: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x1: 0.0, x2: 0.0 };

    #[inline]
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    /// (x₁, x₂)^⊥ = (−x₂, x₁), rotation by +π/2.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.x2, self.x1)
    }

    #[inline]
    pub fn dot(self, other: Self) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    #[inline]
    pub fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x1, -self.x2)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x1 * s, self.x2 * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x1 / s, self.x2 / s)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x1 += o.x1;
        self.x2 += o.x2;
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x1 -= o.x1;
        self.x2 -= o.x2;
    }
}

impl From<(f64, f64)> for Vec2 {
    fn from((x1, x2): (f64, f64)) -> Self {
        Vec2::new(x1, x2)
    }
}
