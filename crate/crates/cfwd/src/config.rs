//! Experiment configuration: a single TOML file selects the mode and holds
//! one section per mode. Unknown keys are rejected so that typos surface as
//! schema errors rather than silently falling back to defaults.

use crate::dynamics::SimConfig;
use crate::error::{Error, Result};
use crate::partition::MassVector;
use crate::step_fn::{MonotoneFn, StepFunction};
use crate::xi::{identity_driver, jump_driver};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    SampleXi,
    Verify,
    /// Alias for `verify` with `suite = "varadhan"`.
    Varadhan,
    /// Alias for `verify` with `suite = "bernstein"`.
    Bernstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Ibp,
    Martingale,
    Varadhan,
    Bernstein,
    XiBounds,
}

/// Monotone driver specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiConfig {
    /// `u -> u` discretized to `resolution` uniform jumps.
    Identity {
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    /// Constant driver: no interaction, pure coalescence.
    Constant { value: f64 },
    /// Explicit jump locations and heights, starting at `base`.
    Steps { base: f64, jumps: Vec<(f64, f64)> },
}

fn default_resolution() -> usize {
    64
}

impl XiConfig {
    pub fn build(&self) -> Result<StepFunction> {
        match self {
            XiConfig::Identity { resolution } => {
                if *resolution == 0 {
                    return Err(Error::config("xi resolution must be positive"));
                }
                Ok(identity_driver(*resolution))
            }
            XiConfig::Constant { value } => Ok(StepFunction::constant(*value)),
            XiConfig::Steps { base, jumps } => jump_driver(*base, jumps),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub particles: usize,
    /// Explicit masses; uniform when empty.
    #[serde(default)]
    pub masses: Vec<f64>,
    pub xi: XiConfig,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_merge_tol")]
    pub merge_tol: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Starting positions; all zeros when empty.
    #[serde(default)]
    pub initial_positions: Vec<f64>,
    /// Also emit the plotting scripts.
    #[serde(default)]
    pub plot: bool,
}

fn default_merge_tol() -> f64 {
    1e-9
}

fn default_record_every() -> usize {
    1
}

impl SimulateSection {
    pub fn to_sim_config(&self, seed: u64) -> Result<SimConfig> {
        if self.particles == 0 {
            return Err(Error::config("particle count must be positive"));
        }
        let masses = if self.masses.is_empty() {
            MassVector::uniform(self.particles)
        } else {
            if self.masses.len() != self.particles {
                return Err(Error::config("masses length must equal particle count"));
            }
            MassVector::new(self.masses.clone())?
        };
        let xi = MonotoneFn::Step(self.xi.build()?);
        let levels = crate::dynamics::levels_from_driver(&xi, &masses);
        let cfg = SimConfig {
            masses,
            levels,
            dt: self.dt,
            t_final: self.t_final,
            merge_tol: self.merge_tol,
            seed,
            record_every: self.record_every,
            initial_positions: self.initial_positions.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleXiSection {
    pub stratum: u32,
    pub radius: f64,
    pub samples: u64,
    pub xi: XiConfig,
    /// Rejection budget per accepted sample.
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_budget() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub suite: Suite,
    /// Driver for the ibp / xi-bounds suites; each suite has its own default.
    #[serde(default)]
    pub xi: Option<XiConfig>,
    #[serde(default = "default_z")]
    pub z_threshold: f64,

    // martingale
    #[serde(default = "default_trajectories")]
    pub trajectories: u64,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,

    // ibp / xi-bounds
    #[serde(default = "default_proposals")]
    pub proposals: u64,
    #[serde(default = "default_max_stratum")]
    pub max_stratum: u32,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,

    // varadhan
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_center")]
    pub center: f64,
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    #[serde(default = "default_paths_per_t")]
    pub paths_per_t: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_z() -> f64 {
    4.0
}
fn default_trajectories() -> u64 {
    1000
}
fn default_particles() -> usize {
    10
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_final() -> f64 {
    0.5
}
fn default_proposals() -> u64 {
    1_000_000
}
fn default_max_stratum() -> u32 {
    3
}
fn default_radius() -> f64 {
    1.2
}
fn default_radii() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_rho() -> f64 {
    0.25
}
fn default_center() -> f64 {
    0.8
}
fn default_t_values() -> Vec<f64> {
    vec![0.01, 0.0175, 0.025, 0.0325, 0.04]
}
fn default_paths_per_t() -> u64 {
    1_000_000
}
fn default_tol() -> f64 {
    0.25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the CLI flag `--out` overrides.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub sample_xi: Option<SampleXiSection>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        if cfg.format_version != FORMAT_VERSION {
            return Err(Error::config(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                cfg.format_version
            )));
        }
        cfg.check_sections()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    fn check_sections(&self) -> Result<()> {
        let need = |ok: bool, name: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("mode requires a [{name}] section")))
            }
        };
        match self.mode {
            Mode::Simulate => need(self.simulate.is_some(), "simulate"),
            Mode::SampleXi => need(self.sample_xi.is_some(), "sample_xi"),
            Mode::Verify | Mode::Varadhan | Mode::Bernstein => {
                need(self.verify.is_some(), "verify")
            }
        }
    }

    /// Mode aliases resolve to a verify suite.
    pub fn effective_suite(&self) -> Option<Suite> {
        match self.mode {
            Mode::Varadhan => Some(Suite::Varadhan),
            Mode::Bernstein => Some(Suite::Bernstein),
            Mode::Verify => self.verify.as_ref().map(|v| v.suite),
            _ => None,
        }
    }
}
