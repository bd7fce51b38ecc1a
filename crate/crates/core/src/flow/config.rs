use serde::{Deserialize, Serialize};

use crate::field::VelocityMethod;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    /// Explicit midpoint rule.
    Rk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Tracers move in the velocity of the initial field, held fixed.
    FrozenField,
    /// The blob carriers move with their own induced velocity, which is
    /// recomputed at every RK stage: the Euler dynamics.
    #[default]
    SelfConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub dt: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default)]
    pub velocity: VelocityMethod,
    /// Carrier snapshots are kept every `store_every` steps; they are the
    /// field history for backward and two-time integration, whose step is
    /// the snapshot interval.
    #[serde(default = "default_store_every")]
    pub store_every: usize,
    /// Trajectories leaving the ball of radius `blowup_factor` times the
    /// initial extent abort the run.
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
}

fn default_store_every() -> usize {
    10
}

fn default_blowup() -> f64 {
    1e3
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            integrator: Integrator::Rk4,
            coupling: Coupling::SelfConsistent,
            velocity: VelocityMethod::default(),
            store_every: default_store_every(),
            blowup_factor: default_blowup(),
        }
    }
}

impl FlowConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.store_every == 0 {
            return Err(Error::param("store_every", "must be at least 1"));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::param("blowup_factor", format!("must exceed 1, got {}", self.blowup_factor)));
        }
        self.velocity.validate()
    }
}
