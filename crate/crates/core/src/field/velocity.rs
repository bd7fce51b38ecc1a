use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blob::VortexBlobField;
use super::treecode::{Treecode, TreecodeParams};
use crate::sum::Cascade;
use crate::{Error, Result, Vec2};

/// v(x) = Σ Γ_i K_ε(x − x_i) by exact summation. Each target's sum is
/// accumulated in particle order with a fixed cascade, so results do not
/// depend on the thread count.
pub fn velocity_direct(field: &VortexBlobField, targets: &[Vec2]) -> Vec<Vec2> {
    targets.par_iter().map(|&x| direct_at(field, x)).collect()
}

pub(crate) fn direct_at(field: &VortexBlobField, x: Vec2) -> Vec2 {
    let eps = field.blob_scale();
    let m = field.mollifier();
    let mut acc = Cascade::default();
    for (p, w) in field.positions().iter().zip(field.weights()) {
        acc.add(m.blob_kernel(x - *p, eps) * *w);
    }
    acc.finish()
}

#[derive(Debug, Clone)]
pub struct TreecodeVelocities {
    pub velocities: Vec<Vec2>,
    /// A priori bound θ^{p+1}/(1 − θ) on the relative truncation error
    /// of each accepted cluster interaction.
    pub error_bound: f64,
    /// True when the particle cloud was degenerate and direct summation
    /// was used instead.
    pub direct_fallback: bool,
}

/// Barnes-Hut evaluation with opening parameter `theta` and multipole
/// order `order`.
pub fn velocity_treecode(field: &VortexBlobField, targets: &[Vec2], theta: f64, order: usize) -> Result<TreecodeVelocities> {
    let params = TreecodeParams {
        theta,
        order,
        ..TreecodeParams::default()
    };
    params.validate()?;
    match Treecode::build(field, params) {
        Some(tree) => Ok(TreecodeVelocities {
            velocities: tree.evaluate(targets),
            error_bound: params.error_bound(),
            direct_fallback: false,
        }),
        None => Ok(TreecodeVelocities {
            velocities: velocity_direct(field, targets),
            error_bound: 0.0,
            direct_fallback: true,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityMethod {
    Direct,
    Treecode {
        theta: f64,
        order: usize,
        #[serde(default = "default_leaf")]
        leaf_size: usize,
    },
}

fn default_leaf() -> usize {
    TreecodeParams::default().leaf_size
}

impl Default for VelocityMethod {
    fn default() -> Self {
        let p = TreecodeParams::default();
        Self::Treecode {
            theta: p.theta,
            order: p.order,
            leaf_size: p.leaf_size,
        }
    }
}

impl VelocityMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Direct => Ok(()),
            Self::Treecode {
                theta,
                order,
                leaf_size,
            } => TreecodeParams {
                theta,
                order,
                leaf_size,
            }
            .validate(),
        }
    }
}

/// Read-only velocity evaluator for one field. The treecode, if any, is
/// built once at construction.
#[derive(Debug, Clone)]
pub struct VelocityEvaluator {
    field: VortexBlobField,
    tree: Option<Treecode>,
}

impl VelocityEvaluator {
    pub fn new(field: VortexBlobField, method: VelocityMethod) -> Result<Self> {
        method.validate()?;
        let tree = match method {
            VelocityMethod::Direct => None,
            VelocityMethod::Treecode {
                theta,
                order,
                leaf_size,
            } => {
                // Small clouds are faster to sum directly.
                if field.len() <= 2 * leaf_size {
                    None
                } else {
                    Treecode::build(
                        &field,
                        TreecodeParams {
                            theta,
                            order,
                            leaf_size,
                        },
                    )
                }
            }
        };
        Ok(Self { field, tree })
    }

    pub fn direct(field: VortexBlobField) -> Self {
        Self { field, tree: None }
    }

    pub fn field(&self) -> &VortexBlobField {
        &self.field
    }

    pub fn eval(&self, targets: &[Vec2]) -> Vec<Vec2> {
        match &self.tree {
            Some(t) => t.evaluate(targets),
            None => velocity_direct(&self.field, targets),
        }
    }

    pub fn eval_point(&self, x: Vec2) -> Vec2 {
        self.eval(std::slice::from_ref(&x))[0]
    }
}

/// Relative L² distance ‖a − b‖/‖b‖ between two velocity samples.
pub fn relative_l2_error(a: &[Vec2], b: &[Vec2]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::param("targets", "length mismatch"));
    }
    let num: f64 = a.iter().zip(b).map(|(x, y)| (*x - *y).norm_sq()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sq()).sum();
    Ok(if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    })
}
