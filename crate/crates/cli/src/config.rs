//! Experiment config files: TOML with one table per subcommand.

use std::path::Path;

use serde::{Deserialize, Serialize};

use kdense::amp::{AmpConfig, InitKind, SquareTerm, ThresholdKind};
use kdense::sweep::{parse_grid, BetaScale, SnrAxis};

use crate::CliError;

/// A grid given either as `"lo:hi:n"` or as an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range(String),
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Grid::Range(s) => parse_grid(s)?,
            Grid::List(v) => v.clone(),
        };
        if v.is_empty() {
            return Err(CliError::Config("grid is empty".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitChoice {
    Ui,
    Ii,
    Both,
}

fn default_trials() -> u64 {
    20
}
fn default_variants() -> Vec<ThresholdKind> {
    vec![ThresholdKind::Vectorial, ThresholdKind::Bernoulli]
}
fn default_max_iter() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-8
}
fn default_square_term() -> SquareTerm {
    SquareTerm::Expected
}
fn default_init() -> InitKind {
    InitKind::Uninformative
}
fn default_quad_order() -> usize {
    kdense::quadrature::DEFAULT_ORDER
}
fn default_se_tol() -> f64 {
    1e-10
}
fn default_se_max_iter() -> usize {
    10_000
}
fn default_both() -> InitChoice {
    InitChoice::Both
}
fn default_true() -> bool {
    true
}
fn default_cap() -> u64 {
    kdense::exact::DEFAULT_ENUMERATION_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmpSweepConfig {
    pub p: usize,
    pub d: usize,
    pub k: Vec<usize>,
    pub grid: Grid,
    #[serde(default)]
    pub axis: SnrAxis,
    /// Multiply grid values by `gamma_amp(p, k, d)` (gamma axis only).
    #[serde(default)]
    pub relative: bool,
    #[serde(default = "default_variants")]
    pub variants: Vec<ThresholdKind>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_init")]
    pub init: InitKind,
    #[serde(default)]
    pub damping: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_square_term")]
    pub square_term: SquareTerm,
    pub seed: Option<u64>,
}

impl AmpSweepConfig {
    pub fn amp_config(&self) -> AmpConfig {
        AmpConfig {
            init: self.init,
            damping: self.damping,
            max_iter: self.max_iter,
            tol: self.tol,
            square_term: self.square_term,
            ..AmpConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeSweepConfig {
    pub p: usize,
    pub d: Vec<usize>,
    pub k: Vec<usize>,
    pub beta_grid: Grid,
    #[serde(default)]
    pub scale: BetaScale,
    #[serde(default = "default_both")]
    pub init: InitChoice,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    #[serde(default = "default_se_tol")]
    pub tol: f64,
    #[serde(default = "default_se_max_iter")]
    pub max_iter: usize,
    /// Also locate the UI/II transitions per k and plot them against beta_amp.
    #[serde(default = "default_true")]
    pub transitions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MleSweepConfig {
    pub p: usize,
    pub k: usize,
    pub d: usize,
    pub grid: Grid,
    #[serde(default)]
    pub axis: SnrAxis,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub kprime: Option<usize>,
    #[serde(default = "default_cap")]
    pub cap: u64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "sweep-amp")]
    pub sweep_amp: Option<AmpSweepConfig>,
    #[serde(rename = "sweep-se")]
    pub sweep_se: Option<SeSweepConfig>,
    #[serde(rename = "mle-mc")]
    pub mle_mc: Option<MleSweepConfig>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }
}

pub fn section<T>(section: Option<T>, name: &str) -> Result<T, CliError> {
    section.ok_or_else(|| CliError::Config(format!("config has no [{name}] table")))
}

/// TOML rendering of a resolved section, for embedding in outputs.
pub fn echo<T: Serialize>(command: &str, seed: u64, resolved: &T) -> String {
    let body = toml::to_string(resolved).unwrap_or_else(|e| format!("<unserializable config: {e}>"));
    format!("kdense {} {command}\nseed = {seed}\n{body}", env!("CARGO_PKG_VERSION"))
}
