use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::field::VortexBlobField;
use crate::sum::pairwise;
use crate::Vec2;

pub trait BoundedFunction {
    fn eval(&self, x: Vec2) -> f64;
    fn sup_abs(&self) -> f64;
}

impl<F: Fn(Vec2) -> f64> BoundedFunction for (F, f64) {
    fn eval(&self, x: Vec2) -> f64 {
        (self.0)(x)
    }

    fn sup_abs(&self) -> f64 {
        self.1
    }
}

/// Bounded functions against which weak convergence of vorticity is
/// witnessed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionaryFunction {
    Constant { value: f64 },
    /// 1 on B_{radius−width}, 0 outside B_{radius+width}, C¹ in between.
    SmoothIndicator { center: Vec2, radius: f64, width: f64 },
    Gaussian { center: Vec2, width: f64 },
    /// cos(k·x + phase).
    Wave { wavenumber: Vec2, phase: f64 },
}

impl BoundedFunction for DictionaryFunction {
    fn eval(&self, x: Vec2) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::SmoothIndicator { center, radius, width } => {
                let s = ((x - center).norm() - (radius - width)) / (2.0 * width);
                if s <= 0.0 {
                    1.0
                } else if s >= 1.0 {
                    0.0
                } else {
                    1.0 - s * s * (3.0 - 2.0 * s)
                }
            }
            Self::Gaussian { center, width } => (-(x - center).norm_sq() / (width * width)).exp(),
            Self::Wave { wavenumber, phase } => (wavenumber.dot(x) + phase).cos(),
        }
    }

    fn sup_abs(&self) -> f64 {
        match *self {
            Self::Constant { value } => value.abs(),
            _ => 1.0,
        }
    }
}

/// ⟨ω, g⟩ = Σᵢ Γᵢ g(xᵢ).
pub fn weak_l1_pairing(omega: &VortexBlobField, g: &impl BoundedFunction) -> f64 {
    let terms: Vec<f64> = omega
        .positions()
        .iter()
        .zip(omega.weights())
        .map(|(&x, &w)| w * g.eval(x))
        .collect();
    pairwise(&terms)
}

/// The sixteen fixed functions used for weak-convergence checks.
pub fn pairing_dictionary() -> Vec<DictionaryFunction> {
    use DictionaryFunction::*;
    let ball = |x1, x2, radius| SmoothIndicator {
        center: Vec2::new(x1, x2),
        radius,
        width: 0.05,
    };
    let gauss = |x1, x2, width| Gaussian {
        center: Vec2::new(x1, x2),
        width,
    };
    let wave = |k1, k2, phase| Wave {
        wavenumber: Vec2::new(k1, k2),
        phase,
    };
    vec![
        Constant { value: 1.0 },
        ball(0.0, 0.0, 0.5),
        ball(0.0, 0.0, 1.0),
        ball(0.0, 0.0, 1.5),
        ball(0.5, 0.0, 0.5),
        ball(-0.5, 0.0, 0.5),
        ball(0.0, 0.5, 0.5),
        ball(0.0, -0.5, 0.5),
        gauss(0.0, 0.0, 0.3),
        gauss(0.4, 0.4, 0.5),
        gauss(-0.6, 0.2, 0.25),
        wave(PI, 0.0, 0.0),
        wave(0.0, PI, 0.0),
        wave(PI, PI, 0.0),
        wave(2.0 * PI, 0.0, 0.5 * PI),
        wave(0.5 * PI, -0.5 * PI, 0.3),
    ]
}
