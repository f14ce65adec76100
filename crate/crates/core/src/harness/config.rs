use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ascent::AscentConfig;
use crate::combine::{CagradConfig, Combiner};
use crate::error::{Error, Result};
use crate::nn::TrainConfig;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "ENSEMBLE_MBO_OUT";
pub const DEFAULT_OUT: &str = "results";

/// Step size and CAGrad radius used when a config leaves them unset.
pub fn task_defaults(task: &str) -> (f64, f64) {
    match task {
        "minibind" => (0.5, 0.5),
        "ridge" => (0.005, 0.2),
        "bowl" => (0.01, 0.3),
        _ => (0.05, 0.5),
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscentSettings {
    pub steps: usize,
    /// Task default when unset.
    pub step_size: Option<f64>,
    /// Task default when unset.
    pub cagrad_c: Option<f64>,
    pub harden_every_step: bool,
    pub normalize_gradients: bool,
    pub clip_radius: Option<f64>,
}

impl Default for AscentSettings {
    fn default() -> Self {
        Self {
            steps: 200,
            step_size: None,
            cagrad_c: None,
            harden_every_step: false,
            normalize_gradients: false,
            clip_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registered task name, or a label for an external dataset.
    pub task: String,
    /// Dimension override for continuous synthetic tasks.
    pub dim: Option<usize>,
    /// External dataset CSV; its metadata sidecar must sit next to it.
    pub dataset: Option<PathBuf>,
    /// Seed of a single run; also seeds task generation.
    pub seed: u64,
    /// Seeds of a multi-seed run; empty means just `seed`.
    pub seeds: Vec<u64>,
    /// Fraction of the total dataset, lowest scores first, used for training.
    pub k: f64,
    pub ensemble_size: usize,
    pub n_candidates: usize,
    pub algorithms: Vec<Combiner>,
    pub ascent: AscentSettings,
    pub train: TrainConfig,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: "minibind".into(),
            dim: None,
            dataset: None,
            seed: 0,
            seeds: Vec::new(),
            k: 0.5,
            ensemble_size: 6,
            n_candidates: 128,
            algorithms: Combiner::ALL.to_vec(),
            ascent: AscentSettings::default(),
            train: TrainConfig::default(),
            out: default_out_dir(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_task(task: &str, seed: u64) -> Self {
        Self {
            task: task.into(),
            seed,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn step_size(&self) -> f64 {
        self.ascent
            .step_size
            .unwrap_or_else(|| task_defaults(&self.task).0)
    }

    pub fn cagrad_c(&self) -> f64 {
        self.ascent
            .cagrad_c
            .unwrap_or_else(|| task_defaults(&self.task).1)
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Ascent settings for one algorithm.
    pub fn ascent_for(&self, combiner: Combiner) -> AscentConfig {
        AscentConfig {
            steps: self.ascent.steps,
            step_size: self.step_size(),
            combiner,
            cagrad_c: self.cagrad_c(),
            record_trajectory: false,
            harden_every_step: self.ascent.harden_every_step,
            normalize_gradients: self.ascent.normalize_gradients,
            clip_radius: self.ascent.clip_radius,
            solver: Default::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k <= 1.0) {
            return Err(Error::InvalidArgument(format!("k must lie in (0, 1], got {}", self.k)));
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
        }
        if self.n_candidates == 0 {
            return Err(Error::InvalidArgument("n_candidates must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("no algorithms selected".into()));
        }
        let mut seen = self.algorithms.clone();
        seen.sort_by_key(|c| c.key());
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(Error::InvalidArgument("duplicate algorithm".into()));
        }
        let s = self.step_size();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {s}")));
        }
        CagradConfig::new(self.cagrad_c())?;
        self.train.validate()
    }
}
