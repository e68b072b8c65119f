//! Experiment configuration files (TOML or JSON, same schema).

use std::path::{Path, PathBuf};

use parahom_core::environment::{EnvironmentSpec, Family, SymMatrix};
use parahom_core::lattice::MAX_DIM;
use parahom_core::rng::child_seed;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Random environment law as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub dimension: usize,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub family: String,
    /// Diffusion matrices, row-major `d × d`; must be diagonal.
    pub controls: Vec<Vec<f64>>,
    #[serde(default)]
    pub offset_range: [f64; 2],
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub smoothing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls_per_cell: Option<usize>,
}

impl EnvironmentConfig {
    pub fn to_spec(&self) -> AppResult<EnvironmentSpec> {
        let d = self.dimension;
        if !(1..=MAX_DIM).contains(&d) {
            return Err(AppError::config(format!("dimension must be 1 or 2, got {d}")));
        }
        let family = Family::parse(&self.family)
            .ok_or_else(|| AppError::config(format!("unknown family {:?} (linear, hjb-min, isaacs-minmax)", self.family)))?;
        let mut controls = Vec::with_capacity(self.controls.len());
        for (k, c) in self.controls.iter().enumerate() {
            let m = SymMatrix::from_row_major(d, c).map_err(|e| AppError::config(format!("control {k}: {e}")))?;
            for a in 0..d {
                for b in 0..d {
                    if a != b && m.get(a, b) != 0.0 {
                        return Err(AppError::config(format!("control {k}: only diagonal diffusion is supported")));
                    }
                }
            }
            controls.push(m.diagonal());
        }
        let spec = EnvironmentSpec {
            dim: d,
            lambda: self.lambda,
            big_lambda: self.big_lambda,
            family,
            controls,
            offset_range: (self.offset_range[0], self.offset_range[1]),
            seed: self.seed,
            smoothing: self.smoothing,
            controls_per_cell: self.controls_per_cell,
        };
        spec.validate().map_err(|e| AppError::config(e.to_string()))?;
        Ok(spec)
    }

    pub fn from_spec(spec: &EnvironmentSpec) -> Self {
        let d = spec.dim;
        EnvironmentConfig {
            dimension: d,
            lambda: spec.lambda,
            big_lambda: spec.big_lambda,
            family: spec.family.name().to_string(),
            controls: spec
                .controls
                .iter()
                .map(|c| {
                    let mut m = vec![0.0; d * d];
                    for a in 0..d {
                        m[a * d + a] = c[a];
                    }
                    m
                })
                .collect(),
            offset_range: [spec.offset_range.0, spec.offset_range.1],
            seed: spec.seed,
            smoothing: spec.smoothing,
            controls_per_cell: spec.controls_per_cell,
        }
    }
}

/// Relative slack on each inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Slack {
    pub abp: f64,
    pub bounds: f64,
    pub subadditivity: f64,
    /// Allowed relative change of a homogenization error under `Δx` halving.
    pub dx_halving: f64,
    /// Agreement between `F̄` and the drift oracle.
    pub oracle: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Slack {
            abp: 0.1,
            bounds: 0.1,
            subadditivity: 0.05,
            dx_halving: 0.2,
            oracle: 0.05,
        }
    }
}

/// Sample counts of the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateCounts {
    pub envelope_fields: usize,
    pub measure_fields: usize,
    pub abp_samples: usize,
    pub random_configs: usize,
    pub lipschitz_seeds: usize,
    pub variance_seeds: usize,
    /// Refinement of the density checks on `G_0`.
    pub density_refinement: usize,
}

impl Default for ValidateCounts {
    fn default() -> Self {
        ValidateCounts {
            envelope_fields: 20,
            measure_fields: 20,
            abp_samples: 100,
            random_configs: 50,
            lipschitz_seeds: 200,
            variance_seeds: 400,
            density_refinement: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    /// Informational; the subcommand decides what runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Monte Carlo sample count; each pipeline has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    #[serde(default = "default_levels")]
    pub levels: Vec<i32>,
    #[serde(default = "default_ells")]
    pub ells: Vec<f64>,
    /// `M = m I` for single-matrix experiments.
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default = "default_m_grid")]
    pub m_grid: Vec<f64>,
    #[serde(default = "default_fbar_level")]
    pub fbar_level: i32,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Samples per bisection step when `F̄` has to be estimated.
    #[serde(default = "default_fbar_seeds")]
    pub fbar_seeds: usize,
    /// Skip the bisection and use this `F̄(M)` where one is needed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fbar: Option<f64>,
    /// Previously written `fbar.csv` for the homogenization-rate run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fbar_table: Option<PathBuf>,
    #[serde(default = "default_corrector_levels")]
    pub corrector_levels: Vec<i32>,
    /// Offset added to `F̄(M)` in the negative-control corrector run.
    #[serde(default = "default_control_offset")]
    pub control_offset: f64,
    #[serde(default = "default_eps_levels")]
    pub eps_levels: Vec<u32>,
    #[serde(default = "default_homog_refinement")]
    pub homog_refinement: usize,
    #[serde(default = "default_true")]
    pub dx_audit: bool,
    #[serde(default = "default_moment_levels")]
    pub moment_levels: Vec<i32>,
    /// Compare `F̄` with the drift oracle in effective-f runs.
    #[serde(default = "default_true")]
    pub oracle: bool,
    #[serde(default = "default_oracle_level")]
    pub oracle_eps_level: u32,
    #[serde(default)]
    pub probes: usize,
    #[serde(default)]
    pub slack: Slack,
    #[serde(default)]
    pub validate: ValidateCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_refinement() -> usize {
    9
}
fn default_levels() -> Vec<i32> {
    vec![0, 1, 2]
}
fn default_ells() -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0]
}
fn default_m() -> f64 {
    1.0
}
fn default_m_grid() -> Vec<f64> {
    vec![-2.0, -1.0, 0.0, 1.0, 2.0]
}
fn default_fbar_level() -> i32 {
    2
}
fn default_tol() -> f64 {
    1e-3
}
fn default_fbar_seeds() -> usize {
    20
}
fn default_corrector_levels() -> Vec<i32> {
    vec![1, 2, 3, 4]
}
fn default_control_offset() -> f64 {
    0.5
}
fn default_eps_levels() -> Vec<u32> {
    vec![1, 2, 3, 4]
}
fn default_homog_refinement() -> usize {
    81
}
fn default_moment_levels() -> Vec<i32> {
    vec![0, 1, 2, 3]
}
fn default_oracle_level() -> u32 {
    4
}
fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Default config around a given environment law.
    pub fn for_environment(spec: &EnvironmentSpec) -> Self {
        let text = format!("[environment]\n{}", toml::to_string(&EnvironmentConfig::from_spec(spec)).expect("serializable"));
        ExperimentConfig::parse_toml(&text).expect("defaults are valid")
    }

    pub fn parse_toml(text: &str) -> AppResult<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| AppError::config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    pub fn parse_json(text: &str) -> AppResult<Self> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| AppError::config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    /// Reads `.json` as JSON and anything else as TOML. Returns the raw bytes
    /// too, for the manifest hash.
    pub fn load(path: &Path) -> AppResult<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| AppError::config(format!("{} is not UTF-8", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let c = if is_json {
            ExperimentConfig::parse_json(text)?
        } else {
            ExperimentConfig::parse_toml(text)?
        };
        Ok((c, bytes))
    }

    pub fn spec(&self) -> AppResult<EnvironmentSpec> {
        self.environment.to_spec()
    }

    pub fn shift(&self) -> SymMatrix {
        SymMatrix::scalar(self.environment.dimension, self.m)
    }

    /// Seed list of length `n` derived from the environment seed.
    pub fn seed_list(&self, n: usize) -> Vec<u64> {
        (0..n as u64).map(|k| child_seed(self.environment.seed, k)).collect()
    }

    /// Structural and CFL-consistency checks beyond the environment itself.
    pub fn check(&self) -> AppResult<()> {
        self.spec()?;
        if self.refinement < 3 {
            return Err(AppError::config("refinement must be at least 3"));
        }
        if self.homog_refinement < 3 {
            return Err(AppError::config("homog_refinement must be at least 3"));
        }
        if self.seeds == Some(0) || self.fbar_seeds == 0 {
            return Err(AppError::config("seeds must be positive"));
        }
        let level_ok = |n: &i32| (-2..=6).contains(n);
        if !self.levels.iter().all(level_ok)
            || !self.corrector_levels.iter().all(level_ok)
            || !self.moment_levels.iter().all(level_ok)
            || !level_ok(&self.fbar_level)
        {
            return Err(AppError::config("levels must lie in -2..=6"));
        }
        // Negative levels need 9^{|n|} time steps per unit; keep that reachable.
        if self.levels.iter().any(|&n| n < 0 && self.refinement % 3usize.pow((-n) as u32) != 0) {
            return Err(AppError::config("negative levels need a refinement divisible by 3^|n|"));
        }
        if self.corrector_levels.len() < 2 || self.eps_levels.len() < 2 || self.moment_levels.len() < 2 {
            return Err(AppError::config("corrector_levels, eps_levels and moment_levels need at least two entries"));
        }
        if self.eps_levels.iter().any(|&k| k == 0 || k > 6) {
            return Err(AppError::config("eps_levels must lie in 1..=6"));
        }
        if !(self.tol > 0.0) {
            return Err(AppError::config("tol must be positive"));
        }
        if self.m_grid.len() < 2 || self.m_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AppError::config("m_grid must be strictly increasing with at least two points"));
        }
        if self.ells.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AppError::config("ells must be strictly increasing"));
        }
        let s = &self.slack;
        if [s.abp, s.bounds, s.subadditivity, s.dx_halving, s.oracle].iter().any(|v| !(*v >= 0.0)) {
            return Err(AppError::config("slack values must be non-negative"));
        }
        Ok(())
    }
}
