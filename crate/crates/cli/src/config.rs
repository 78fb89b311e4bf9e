//! Run configuration. Only `dataset` and `target` are mandatory; every other
//! key falls back to the documented default. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use qfs_core::evalharness::{TrainOptions, DEFAULT_EVAL_SEEDS, DEFAULT_TEST_FRACTION};
use qfs_core::geometry::{IntervalMode, SpacingRepair};
use qfs_core::infometrics::DEFAULT_MIN_WEIGHT;
use qfs_core::pulses::{DEFAULT_N_STEPS, DEFAULT_SLEW_BOUND};
use qfs_core::quantum_sim::{DEFAULT_MAX_ATOMS, DEFAULT_SHOTS, DEFAULT_SUBSTEP_FACTOR};
use qfs_core::selection::{FilterMode, DEFAULT_ALPHA, DEFAULT_FILTER_FRACTION, DEFAULT_PRUNE_THRESHOLD};
use qfs_core::{MdsOptions, MissingPolicy, PhysicalConstants, ScheduleShape};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV file; relative paths resolve against the config file's directory.
    pub dataset: PathBuf,
    pub target: String,
    /// Label used in reports; defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_name: Option<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    #[serde(default = "default_n_bins")]
    pub n_bins: usize,
    #[serde(default = "default_min_weight")]
    pub min_weight: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,

    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub shape: ScheduleShape,
    #[serde(default)]
    pub interval_mode: IntervalMode,
    #[serde(default)]
    pub mds: MdsTuning,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default = "default_slew_bound")]
    pub slew_bound: f64,

    #[serde(default = "default_substep_factor")]
    pub substep_factor: usize,
    #[serde(default = "default_max_atoms")]
    pub max_atoms: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
    /// Also dump the final state as `amplitudes.bin`.
    #[serde(default)]
    pub write_amplitudes: bool,
    #[serde(default)]
    pub seeds: SeedConfig,

    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_prune_threshold")]
    pub prune_threshold: f64,
    #[serde(default = "default_filter_fraction")]
    pub filter_fraction: f64,
    #[serde(default)]
    pub filter_mode: FilterMode,
    #[serde(default = "default_k_range")]
    pub k_range: Vec<usize>,
    #[serde(default = "default_three")]
    pub n_alternatives: usize,
    #[serde(default = "default_three")]
    pub alternative_size: usize,

    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub train: TrainOptions,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    /// Seeds the MDS restarts (restart r uses base_seed + r) and shot sampling.
    pub base_seed: u64,
    pub n_restarts: usize,
    pub eval_seeds: Vec<u64>,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            base_seed: 0,
            n_restarts: MdsOptions::default().n_restarts,
            eval_seeds: DEFAULT_EVAL_SEEDS.to_vec(),
        }
    }
}

/// SMACOF knobs other than seeding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdsTuning {
    pub max_iter: usize,
    pub tol: f64,
    pub jitter: f64,
    pub repair: SpacingRepair,
}

impl Default for MdsTuning {
    fn default() -> Self {
        let d = MdsOptions::default();
        Self {
            max_iter: d.max_iter,
            tol: d.tol,
            jitter: d.jitter,
            repair: d.repair,
        }
    }
}

fn default_delimiter() -> char {
    ','
}
fn default_n_bins() -> usize {
    qfs_core::dataset::DEFAULT_N_BINS
}
fn default_min_weight() -> f64 {
    DEFAULT_MIN_WEIGHT
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("qfs-out")
}
fn default_n_steps() -> usize {
    DEFAULT_N_STEPS
}
fn default_slew_bound() -> f64 {
    DEFAULT_SLEW_BOUND
}
fn default_substep_factor() -> usize {
    DEFAULT_SUBSTEP_FACTOR
}
fn default_max_atoms() -> usize {
    DEFAULT_MAX_ATOMS
}
fn default_shots() -> u64 {
    DEFAULT_SHOTS
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_prune_threshold() -> f64 {
    DEFAULT_PRUNE_THRESHOLD
}
fn default_filter_fraction() -> f64 {
    DEFAULT_FILTER_FRACTION
}
fn default_k_range() -> Vec<usize> {
    (1..=6).collect()
}
fn default_three() -> usize {
    3
}
fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

impl RunConfig {
    /// A config with every default filled in.
    pub fn new(dataset: impl Into<PathBuf>, target: impl Into<String>) -> Self {
        let mut doc = toml::Table::new();
        doc.insert("dataset".into(), toml::Value::String(dataset.into().to_string_lossy().into_owned()));
        doc.insert("target".into(), toml::Value::String(target.into()));
        doc.try_into().expect("defaults deserialize")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and anchors its relative paths at the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.dataset.is_relative() {
            cfg.dataset = base.join(&cfg.dataset);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.target.is_empty() {
            return bad("`target` must not be empty".into());
        }
        if !self.delimiter.is_ascii() {
            return bad(format!("delimiter `{}` must be a single ASCII character", self.delimiter));
        }
        if self.n_bins < 2 {
            return bad(format!("n_bins must be at least 2, got {}", self.n_bins));
        }
        if !(self.min_weight > 0.0 && self.min_weight <= 1.0) {
            return bad(format!("min_weight must lie in (0, 1], got {}", self.min_weight));
        }
        if self.n_steps < 2 {
            return bad(format!("n_steps must be at least 2, got {}", self.n_steps));
        }
        if self.shots == 0 {
            return bad("shots must be positive".into());
        }
        if self.seeds.n_restarts == 0 {
            return bad("seeds.n_restarts must be positive".into());
        }
        if self.seeds.eval_seeds.is_empty() {
            return bad("seeds.eval_seeds must not be empty".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.filter_fraction > 0.0 && self.filter_fraction <= 1.0) {
            return bad(format!("filter_fraction must lie in (0, 1], got {}", self.filter_fraction));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.k_range.is_empty() || self.k_range.contains(&0) {
            return bad("k_range must be a non-empty list of positive sizes".into());
        }
        if !(self.slew_bound > 0.0) {
            return bad("slew_bound must be positive".into());
        }
        self.constants.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn dataset_label(&self) -> String {
        self.dataset_name.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
        })
    }

    pub fn mds_options(&self) -> MdsOptions {
        MdsOptions {
            n_restarts: self.seeds.n_restarts,
            base_seed: self.seeds.base_seed,
            max_iter: self.mds.max_iter,
            tol: self.mds.tol,
            jitter: self.mds.jitter,
            repair: self.mds.repair,
        }
    }
}
