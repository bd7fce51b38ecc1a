//! Command-line driver: configuration, dispatch and plot output.

pub mod config;
pub mod dispatch;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{parse_config, Command, ConfigError, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "l1euler", version, about = "Vortex-blob Euler flows with integrable vorticity: build and verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Integrate the blob flow and write fields and the flow map.
    Simulate(Common),
    /// Evaluate the weak-form residuals on a simulated run.
    Verify(Common),
    /// Stability of flows and solutions under perturbed data.
    Stability(Common),
    /// Mollify, solve and compare a schedule of blob scales.
    Existence(Common),
    /// Fit the translation law of the kernel.
    KernelCheck(Common),
    /// Flow distance against velocity difference under weight perturbations.
    Probe(Common),
    /// Run the command named in a configuration file.
    Run {
        /// Configuration file; must contain `command`.
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Blob scale ε.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time T.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Carrier cells along the longer side of the support box.
    #[arg(long)]
    pub n: Option<i64>,
    /// Treecode opening parameter.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Treecode expansion order.
    #[arg(long)]
    pub order: Option<i64>,
    /// Worker threads, or "auto".
    #[arg(long)]
    pub threads: Option<String>,
    /// Omit wall-clock times so reruns are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
    /// Also write SVG plots.
    #[arg(long)]
    pub plots: bool,
    /// Any other key, dotted, e.g. `--set stability.n_levels=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Common {
    fn overrides(&self, command: Option<Command>) -> Result<Overrides, ConfigError> {
        let mut o = Overrides {
            command,
            ..Overrides::default()
        };
        if let Some(p) = &self.output {
            o.set("output", p.to_string_lossy().into_owned());
        }
        for (key, v) in [("numerics.eps", self.eps), ("numerics.dt", self.dt), ("numerics.t_end", self.t_end), ("numerics.theta", self.theta)] {
            if let Some(v) = v {
                o.set(key, v);
            }
        }
        for (key, v) in [("numerics.n", self.n), ("numerics.order", self.order)] {
            if let Some(v) = v {
                o.set(key, v);
            }
        }
        if let Some(t) = &self.threads {
            match t.parse::<i64>() {
                Ok(n) => o.set("threads", n),
                Err(_) => o.set("threads", t.clone()),
            }
        }
        if self.deterministic {
            o.set("deterministic", true);
        }
        if self.plots {
            o.set("plots", true);
        }
        for s in &self.set {
            o.set_raw(s)?;
        }
        Ok(o)
    }
}

impl CliCommand {
    /// The validated configuration this invocation describes.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let (command, common, file) = match self {
            Self::Simulate(c) => (Some(Command::Simulate), c, None),
            Self::Verify(c) => (Some(Command::Verify), c, None),
            Self::Stability(c) => (Some(Command::Stability), c, None),
            Self::Existence(c) => (Some(Command::Existence), c, None),
            Self::KernelCheck(c) => (Some(Command::KernelCheck), c, None),
            Self::Probe(c) => (Some(Command::Probe), c, None),
            Self::Run { file, common } => (None, common, Some(file)),
        };
        let path = match (file, &common.config) {
            (Some(_), Some(_)) => return Err(ConfigError("give the file either positionally or with --config".into())),
            (Some(f), None) | (None, Some(f)) => Some(f.as_path()),
            (None, None) => None,
        };
        parse_config(path, &common.overrides(command)?)
    }
}
