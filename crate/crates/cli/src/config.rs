//! Experiment configuration: a TOML file, two environment overrides and the
//! command-line flags, merged in that order of increasing priority.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use dmetvqe_core::optimize::BfgsOptions;
use dmetvqe_core::{Boundary, DmetConfig, Solver};
use serde::Deserialize;

pub const ENV_OUT_DIR: &str = "DMETVQE_OUT_DIR";
pub const ENV_THREADS: &str = "DMETVQE_THREADS";

/// On-disk schema. Every section and key is optional; unknown keys are errors.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub lattice: LatticeSection,
    pub method: MethodSection,
    pub trotter: TrotterSection,
    pub optimizer: OptimizerSection,
    pub dmet: DmetSection,
    pub output: OutputSection,
    pub execution: ExecutionSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub sites: Option<usize>,
    pub hopping: Option<f64>,
    #[serde(rename = "U")]
    pub interactions: Option<Vec<f64>>,
    pub boundary: Option<BoundaryName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    Periodic,
    Antiperiodic,
    Open,
}

impl From<BoundaryName> for Boundary {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::Periodic => Boundary::Periodic,
            BoundaryName::Antiperiodic => Boundary::AntiPeriodic,
            BoundaryName::Open => Boundary::Open,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Exact,
    Uccsd,
    Dmet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Ed,
    Uccsd,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSection {
    pub kind: Option<MethodKind>,
    pub fragment_size: Option<usize>,
    pub solver: Option<SolverKind>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrotterSection {
    pub order: Option<u32>,
    pub steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iter: Option<usize>,
    pub grad_tol: Option<f64>,
    pub f_tol: Option<f64>,
    pub fd_step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmetSection {
    pub max_macro_iter: Option<usize>,
    pub u_tol: Option<f64>,
    pub count_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionSection {
    pub threads: Option<usize>,
    pub timeout_secs: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

/// Values taken from the command line; `None` defers to lower layers.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub timeout_secs: Option<f64>,
}

/// Per-command fallbacks used when the config leaves a key out.
#[derive(Debug, Clone)]
pub struct Defaults {
    pub sites: usize,
    pub interactions: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub sites: usize,
    pub hopping: f64,
    pub interactions: Vec<f64>,
    pub boundary: Boundary,
    pub method: MethodKind,
    pub fragment_size: usize,
    pub solver: SolverKind,
    pub trotter_order: u32,
    pub trotter_steps: usize,
    pub bfgs: BfgsOptions,
    pub max_macro_iter: Option<usize>,
    pub u_tol: Option<f64>,
    pub count_tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub timeout: Option<Duration>,
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

impl Settings {
    /// Merges the layers and validates the result before anything runs.
    pub fn resolve(file: FileConfig, defaults: Defaults, cli: &Overrides) -> Result<Self> {
        let env_threads = match env_var(ENV_THREADS) {
            Some(v) => Some(v.parse::<usize>().with_context(|| format!("{ENV_THREADS}={v:?} is not a thread count"))?),
            None => None,
        };
        let d = BfgsOptions::default();
        let o = &file.optimizer;
        let s = Settings {
            sites: file.lattice.sites.unwrap_or(defaults.sites),
            hopping: file.lattice.hopping.unwrap_or(1.0),
            interactions: file.lattice.interactions.unwrap_or(defaults.interactions),
            boundary: file.lattice.boundary.map_or(Boundary::AntiPeriodic, Boundary::from),
            method: file.method.kind.unwrap_or(MethodKind::Dmet),
            fragment_size: file.method.fragment_size.unwrap_or(1),
            solver: file.method.solver.unwrap_or(SolverKind::Ed),
            trotter_order: file.trotter.order.unwrap_or(1),
            trotter_steps: file.trotter.steps.unwrap_or(1),
            bfgs: BfgsOptions {
                max_iter: o.max_iter.unwrap_or(d.max_iter),
                grad_tol: o.grad_tol.unwrap_or(d.grad_tol),
                f_tol: o.f_tol.unwrap_or(d.f_tol),
                fd_step: o.fd_step.unwrap_or(d.fd_step),
            },
            max_macro_iter: file.dmet.max_macro_iter,
            u_tol: file.dmet.u_tol,
            count_tol: file.dmet.count_tol,
            out_dir: cli.out.clone().or_else(|| env_var(ENV_OUT_DIR).map(PathBuf::from)).or(file.output.dir),
            threads: cli.threads.or(env_threads).or(file.execution.threads),
            timeout: match cli.timeout_secs.or(file.execution.timeout_secs) {
                Some(t) if t.is_finite() && t > 0.0 => Some(Duration::from_secs_f64(t)),
                Some(t) => bail!("timeout must be a positive number of seconds, got {t}"),
                None => None,
            },
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.sites >= 2, "lattice.sites must be at least 2, got {}", self.sites);
        ensure!(self.sites.is_multiple_of(2), "half filling needs an even number of sites, got {}", self.sites);
        ensure!(self.hopping.is_finite() && self.hopping != 0.0, "lattice.hopping must be finite and nonzero");
        ensure!(!self.interactions.is_empty(), "lattice.U must list at least one value");
        for &u in &self.interactions {
            ensure!(u.is_finite() && u >= 0.0, "lattice.U values must be finite and non-negative, got {u}");
        }
        ensure!(matches!(self.trotter_order, 1 | 2), "trotter.order must be 1 or 2, got {}", self.trotter_order);
        ensure!(self.trotter_steps >= 1, "trotter.steps must be at least 1");
        ensure!(
            self.fragment_size >= 1 && self.sites.is_multiple_of(self.fragment_size),
            "method.fragment_size {} does not tile {} sites",
            self.fragment_size,
            self.sites
        );
        ensure!(self.bfgs.max_iter >= 1, "optimizer.max_iter must be at least 1");
        for (name, v) in [
            ("optimizer.grad_tol", Some(self.bfgs.grad_tol)),
            ("optimizer.fd_step", Some(self.bfgs.fd_step)),
            ("dmet.u_tol", self.u_tol),
            ("dmet.count_tol", self.count_tol),
        ] {
            if let Some(v) = v {
                ensure!(v.is_finite() && v > 0.0, "{name} must be positive, got {v}");
            }
        }
        ensure!(self.bfgs.f_tol.is_finite() && self.bfgs.f_tol >= 0.0, "optimizer.f_tol must be non-negative");
        ensure!(self.threads != Some(0), "thread count must be at least 1");
        Ok(())
    }

    pub fn uccsd_solver(&self) -> Solver {
        Solver::Uccsd {
            trotter_order: self.trotter_order,
            trotter_steps: self.trotter_steps,
        }
    }

    /// DMET settings for one cell.
    pub fn dmet(&self, interaction: f64, fragment_size: usize, solver: Solver) -> DmetConfig {
        let mut cfg = DmetConfig::new(self.sites, interaction, fragment_size, solver);
        cfg.hopping = self.hopping;
        cfg.boundary = self.boundary;
        cfg.vqe = self.bfgs;
        if let Some(n) = self.max_macro_iter {
            cfg.max_macro_iter = n;
        }
        if let Some(t) = self.u_tol {
            cfg.u_tol = t;
        }
        if let Some(t) = self.count_tol {
            cfg.count_tol = t;
        }
        cfg
    }
}
