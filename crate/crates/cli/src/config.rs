//! Run configuration: one TOML file, overridden by flags, validated before
//! anything runs.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use l1euler::experiments::{MetricSetup, Perturbation, ProbeConfig};
use l1euler::field::{InitialVorticitySpec, TreecodeParams, VelocityMethod};
use l1euler::flow::{FlowConfig, Integrator};
use l1euler::kernel::QuadratureSpec;
use l1euler::weakform::Nonlinearity;
use l1euler::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Verify,
    Stability,
    Existence,
    KernelCheck,
    Probe,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().unwrap().get_name())
    }
}

/// Worker threads: a count, or "auto" for one per core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threads {
    Count(usize),
    Named(String),
}

impl Default for Threads {
    fn default() -> Self {
        Self::Named("auto".into())
    }
}

impl Threads {
    pub fn count(&self) -> Option<usize> {
        match self {
            Self::Count(n) => Some(*n),
            Self::Named(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityChoice {
    Direct,
    Treecode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Blob scale ε.
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Carrier cells along the longer side of the support box.
    pub n: usize,
    pub velocity: VelocityChoice,
    pub theta: f64,
    pub order: usize,
    pub leaf_size: usize,
    pub integrator: Integrator,
    pub store_every: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        let tree = TreecodeParams::default();
        Self {
            eps: 0.05,
            dt: 0.01,
            t_end: 1.0,
            n: 64,
            velocity: VelocityChoice::Treecode,
            theta: tree.theta,
            order: tree.order,
            leaf_size: tree.leaf_size,
            integrator: Integrator::Rk4,
            store_every: 10,
        }
    }
}

impl Numerics {
    pub fn velocity_method(&self) -> VelocityMethod {
        match self.velocity {
            VelocityChoice::Direct => VelocityMethod::Direct,
            VelocityChoice::Treecode => VelocityMethod::Treecode {
                theta: self.theta,
                order: self.order,
                leaf_size: self.leaf_size,
            },
        }
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            dt: self.dt,
            integrator: self.integrator,
            velocity: self.velocity_method(),
            store_every: self.store_every,
            ..FlowConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Flow labels fill the ball of this radius about the origin.
    pub label_radius: f64,
    pub label_spacing: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            label_radius: 2.0,
            label_spacing: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Largest accepted |residual| / scale, and identity gap / scale.
    pub tolerance: f64,
    pub test_center: Vec2,
    pub test_radius: f64,
    pub beta: Nonlinearity,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            test_center: Vec2::new(0.5, 0.4),
            test_radius: 1.0,
            beta: Nonlinearity::Arctan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub perturbation: Perturbation,
    pub n_levels: usize,
    pub setup: MetricSetup,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            perturbation: Perturbation::strong(),
            n_levels: 3,
            setup: MetricSetup::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExistenceSection {
    pub eps_levels: Vec<f64>,
    pub spacing_ratio: f64,
    pub setup: MetricSetup,
}

impl Default for ExistenceSection {
    fn default() -> Self {
        Self {
            eps_levels: vec![0.08, 0.04, 0.02],
            spacing_ratio: 1.0,
            setup: MetricSetup::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub p_list: Vec<f64>,
    pub h_list: Vec<f64>,
    pub quadrature: QuadratureSpec,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            p_list: vec![4.0 / 3.0, 1.5, 5.0 / 3.0],
            h_list: (3..=8).map(|k| 0.5f64.powi(k)).collect(),
            quadrature: QuadratureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub deltas: Vec<f64>,
    /// The blob nearest this point has its weight perturbed.
    pub target: Vec2,
    pub settings: ProbeConfig,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            deltas: vec![1e-2, 1e-3, 1e-4],
            target: Vec2::new(0.5, 0.0),
            settings: ProbeConfig::default(),
        }
    }
}

fn default_initial() -> InitialVorticitySpec {
    InitialVorticitySpec::rankine(1.0, 1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub output: PathBuf,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub threads: Threads,
    #[serde(default)]
    pub plots: bool,
    #[serde(default = "default_initial")]
    pub initial: InitialVorticitySpec,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub existence: ExistenceSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub probe: ProbeSection,
}

/// A configuration problem, always reported as a usage error.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, why: impl fmt::Display) -> ConfigError {
    ConfigError(format!("`{key}` {why}"))
}

/// Flag overrides, applied on top of the file as dotted `key = value`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub entries: Vec<(String, toml::Value)>,
}

impl Overrides {
    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.entries.push((key.to_string(), value.into()));
    }

    /// Parses `key=value`, reading the value as TOML and falling back to a
    /// bare string.
    pub fn set_raw(&mut self, entry: &str) -> Result<(), ConfigError> {
        let (key, raw) = entry
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override `{entry}` is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        self.entries.push((key.to_string(), value));
        Ok(())
    }
}

fn insert(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts = key.split('.').peekable();
    let mut here = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            here.insert(part.to_string(), value);
            return Ok(());
        }
        here = here
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| bad(key, "crosses a key that is not a table"))?;
    }
    Err(bad(key, "is empty"))
}

/// Reads the optional file, applies the overrides and validates.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    if let Some(cmd) = overrides.command {
        let name = toml::Value::String(cmd.to_string());
        match table.get("command") {
            Some(found) if found != &name => {
                return Err(bad("command", format!("is {found} in the file but {cmd} on the command line")));
            }
            _ => {
                table.insert("command".into(), name);
            }
        }
    }
    // so that `initial.<field>` overrides refine the default rather than
    // replacing it with a table that has no `kind`
    if !table.contains_key("initial") && overrides.entries.iter().any(|(k, _)| k.starts_with("initial.")) {
        let seed = toml::Value::try_from(default_initial()).map_err(|e| ConfigError(e.to_string()))?;
        table.insert("initial".into(), seed);
    }
    for (k, v) in &overrides.entries {
        insert(&mut table, k, v.clone())?;
    }
    for key in ["command", "output"] {
        if !table.contains_key(key) {
            return Err(bad(key, "is required"));
        }
    }
    let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive, got {v}")))
    }
}

fn positive_count(key: &str, v: usize) -> Result<(), ConfigError> {
    if v > 0 {
        Ok(())
    } else {
        Err(bad(key, "must be positive, got 0"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.numerics;
        positive("numerics.eps", n.eps)?;
        positive("numerics.dt", n.dt)?;
        positive("numerics.t_end", n.t_end)?;
        positive("numerics.theta", n.theta)?;
        positive_count("numerics.n", n.n)?;
        positive_count("numerics.order", n.order)?;
        positive_count("numerics.leaf_size", n.leaf_size)?;
        positive_count("numerics.store_every", n.store_every)?;
        match &self.threads {
            Threads::Count(c) => positive_count("threads", *c)?,
            Threads::Named(s) if s == "auto" => {}
            Threads::Named(s) => return Err(bad("threads", format!("must be a count or \"auto\", got \"{s}\""))),
        }
        if self.output.as_os_str().is_empty() {
            return Err(bad("output", "is empty"));
        }
        self.initial.validate().map_err(|e| bad("initial", e))?;
        n.velocity_method().validate().map_err(|e| bad("numerics", e))?;
        positive("simulate.label_radius", self.simulate.label_radius)?;
        positive("simulate.label_spacing", self.simulate.label_spacing)?;
        positive("verify.tolerance", self.verify.tolerance)?;
        positive("verify.test_radius", self.verify.test_radius)?;
        self.verify.beta.validate().map_err(|e| bad("verify.beta", e))?;
        positive_count("stability.n_levels", self.stability.n_levels)?;
        self.stability.setup.validate().map_err(|e| bad("stability.setup", e))?;
        self.existence.setup.validate().map_err(|e| bad("existence.setup", e))?;
        positive("existence.spacing_ratio", self.existence.spacing_ratio)?;
        for &e in &self.existence.eps_levels {
            positive("existence.eps_levels", e)?;
        }
        for &p in &self.kernel.p_list {
            if !(p > 1.0 && p < 2.0) {
                return Err(bad("kernel.p_list", format!("entries must lie in (1, 2), got {p}")));
            }
        }
        for &h in &self.kernel.h_list {
            positive("kernel.h_list", h.abs())?;
        }
        for &d in &self.probe.deltas {
            if !(d != 0.0 && d.is_finite()) {
                return Err(bad("probe.deltas", format!("entries must be nonzero, got {d}")));
            }
        }
        self.probe.settings.validate().map_err(|e| bad("probe.settings", e))?;
        Ok(())
    }

    /// The effective configuration, as written next to the results.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
