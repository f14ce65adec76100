//! Benchmark tasks: synthetic problems with exact oracles, and externally
//! supplied datasets without one.

mod analytic;
mod minibind;

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{meta_path, Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::space::{Design, DesignPoint, DesignSpace};

pub use analytic::{Bowl, Ridge, RIDGE_BETA, RIDGE_NOISE};
pub use minibind::MiniBind;

/// Registered task names.
pub const TASK_NAMES: [&str; 3] = ["minibind", "ridge", "bowl"];
pub const DEFAULT_RIDGE_DIM: usize = 32;
pub const DEFAULT_BOWL_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    ExactLookup,
    ExactAnalytic,
}

/// Ground-truth objective over hard designs in task units.
#[derive(Debug, Clone, PartialEq)]
pub enum Oracle {
    MiniBind(MiniBind),
    Ridge(Ridge),
    Bowl(Bowl),
}

impl Oracle {
    pub fn kind(&self) -> OracleKind {
        match self {
            Oracle::MiniBind(_) => OracleKind::ExactLookup,
            Oracle::Ridge(_) | Oracle::Bowl(_) => OracleKind::ExactAnalytic,
        }
    }

    pub fn space(&self) -> DesignSpace {
        match self {
            Oracle::MiniBind(t) => t.space(),
            Oracle::Ridge(t) => t.space(),
            Oracle::Bowl(t) => t.space(),
        }
    }

    /// Scores one design; the design must belong to the task's space.
    pub fn score(&self, design: &Design) -> Result<f64> {
        self.space().check(design)?;
        Ok(match (self, design) {
            (Oracle::MiniBind(t), Design::Tokens(s)) => t.lookup(s),
            (Oracle::Ridge(t), Design::Real(x)) => t.score(x),
            (Oracle::Bowl(t), Design::Real(x)) => t.score(x),
            _ => unreachable!("space check rejects mismatched designs"),
        })
    }
}

/// A task: its design space, total dataset, score range and optional oracle.
///
/// Every oracle query made through [`TaskSpec::evaluate_oracle`] or
/// [`TaskSpec::evaluate_points`] is counted; building the total dataset is not.
#[derive(Debug)]
pub struct TaskSpec {
    name: String,
    seed: u64,
    oracle: Option<Oracle>,
    total: Dataset,
    y_min: f64,
    y_max: f64,
    oracle_calls: AtomicU64,
}

impl TaskSpec {
    fn new(name: &str, seed: u64, oracle: Option<Oracle>, total: Dataset) -> Result<Self> {
        let y_min = total.min_y().ok_or(Error::Empty("total dataset"))?;
        let y_max = total.max_y().ok_or(Error::Empty("total dataset"))?;
        Self::with_range(name, seed, oracle, total, y_min, y_max)
    }

    fn with_range(
        name: &str,
        seed: u64,
        oracle: Option<Oracle>,
        total: Dataset,
        y_min: f64,
        y_max: f64,
    ) -> Result<Self> {
        if !(y_max > y_min) {
            return Err(Error::DegenerateRange { y_min, y_max });
        }
        Ok(Self {
            name: name.to_string(),
            seed,
            oracle,
            total,
            y_min,
            y_max,
            oracle_calls: AtomicU64::new(0),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn space(&self) -> &DesignSpace {
        self.total.space()
    }

    pub fn oracle(&self) -> Option<&Oracle> {
        self.oracle.as_ref()
    }

    pub fn has_oracle(&self) -> bool {
        self.oracle.is_some()
    }

    pub fn total(&self) -> &Dataset {
        &self.total
    }

    pub fn total_size(&self) -> usize {
        self.total.len()
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// Number of oracle evaluations performed so far.
    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls.load(Ordering::SeqCst)
    }

    fn require_oracle(&self) -> Result<&Oracle> {
        self.oracle
            .as_ref()
            .ok_or_else(|| Error::NoOracle(self.name.clone()))
    }

    /// Exact scores of designs given in task units.
    pub fn evaluate_oracle(&self, designs: &[Design]) -> Result<Vec<f64>> {
        let oracle = self.require_oracle()?;
        let scores = designs
            .par_iter()
            .map(|d| oracle.score(d))
            .collect::<Result<Vec<_>>>()?;
        self.oracle_calls
            .fetch_add(designs.len() as u64, Ordering::SeqCst);
        Ok(scores)
    }

    /// Exact scores of points in the optimization representation of `space`.
    ///
    /// Discrete points must be hard.
    pub fn evaluate_points(&self, points: &[DesignPoint], space: &DesignSpace) -> Result<Vec<f64>> {
        self.require_oracle()?;
        let mut designs = Vec::with_capacity(points.len());
        for (index, p) in points.iter().enumerate() {
            if !space.is_hard(p) {
                return Err(Error::NotHard { index });
            }
            designs.push(space.decode(p)?);
        }
        self.evaluate_oracle(&designs)
    }

    /// Metadata sidecar describing this task's total dataset.
    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta::new(self.space(), self.y_min, self.y_max)
    }

    /// Writes the total dataset as CSV plus its metadata sidecar.
    pub fn export(&self, csv_path: &Path) -> Result<()> {
        self.total.write_csv(csv_path)?;
        self.meta().write(&meta_path(csv_path))
    }
}

pub(crate) fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn make_minibind(seed: u64) -> Result<TaskSpec> {
    let mb = MiniBind::generate(seed);
    let total = mb.enumerate()?;
    TaskSpec::new("minibind", seed, Some(Oracle::MiniBind(mb)), total)
}

pub fn make_ridge(seed: u64, dim: usize) -> Result<TaskSpec> {
    let ridge = Ridge::generate(seed, dim)?;
    let total = ridge.sample_dataset(seed)?;
    TaskSpec::new("ridge", seed, Some(Oracle::Ridge(ridge)), total)
}

pub fn make_bowl(seed: u64, dim: usize) -> Result<TaskSpec> {
    let bowl = Bowl::generate(seed, dim)?;
    let total = bowl.sample_dataset(seed)?;
    TaskSpec::new("bowl", seed, Some(Oracle::Bowl(bowl)), total)
}

/// Looks a task up by name, using default dimensions.
pub fn make_task(name: &str, seed: u64) -> Result<TaskSpec> {
    match name {
        "minibind" => make_minibind(seed),
        "ridge" => make_ridge(seed, DEFAULT_RIDGE_DIM),
        "bowl" => make_bowl(seed, DEFAULT_BOWL_DIM),
        other => Err(Error::UnknownTask(other.to_string())),
    }
}

/// Loads an external dataset as an oracle-free task.
///
/// The score range comes from the metadata, not the rows.
pub fn ingest_csv(csv_path: &Path, meta_file: &Path) -> Result<TaskSpec> {
    let meta = DatasetMeta::read(meta_file)?;
    let space = meta.space()?;
    let total = Dataset::read_csv(csv_path, &space)?;
    if total.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let name = csv_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("external")
        .to_string();
    TaskSpec::with_range(&name, 0, None, total, meta.y_min_total, meta.y_max_total)
}
