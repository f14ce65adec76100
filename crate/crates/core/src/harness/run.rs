use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::ascent::{ascend_batch, Trajectory};
use crate::combine::Combiner;
use crate::dataset::{meta_path, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{normalize_score, summarize_scores, ScoreSummary};
use crate::nn::{train_ensemble, Ensemble, Proxy, TrainConfig};
use crate::space::{Design, DesignPoint, DesignSpace};
use crate::tasks::{ingest_csv, make_bowl, make_ridge, make_task, TaskSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub index: usize,
    pub val_mse: f64,
    pub val_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Combiner,
    pub summary: ScoreSummary,
}

/// Best score present in the MBO dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetBaseline {
    pub max_raw: f64,
    pub max_normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCalls {
    pub training: u64,
    pub evaluation: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub seed: u64,
    /// False when scores are proxy predictions because the task has no oracle.
    pub verified: bool,
    pub k: f64,
    pub mbo_size: usize,
    pub ensemble_size: usize,
    pub n_candidates: usize,
    pub steps: usize,
    pub step_size: f64,
    pub cagrad_c: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub baseline: DatasetBaseline,
    pub members: Vec<MemberReport>,
    pub algorithms: Vec<AlgorithmReport>,
    pub oracle_calls: OracleCalls,
}

impl RunReport {
    pub fn algorithm(&self, c: Combiner) -> Option<&AlgorithmReport> {
        self.algorithms.iter().find(|a| a.algorithm == c)
    }
}

/// Wall-clock seconds per stage; kept apart from the report so reports stay
/// reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub setup_secs: f64,
    pub train_secs: f64,
    pub algorithms: Vec<(Combiner, f64)>,
    pub total_secs: f64,
}

/// Final designs of one algorithm and their scores.
#[derive(Debug, Clone)]
pub struct AlgorithmDesigns {
    pub algorithm: Combiner,
    pub designs: Vec<Design>,
    pub scores: Vec<f64>,
}

/// Everything a run produces in memory.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub timing: Timing,
    pub task: TaskSpec,
    pub ensemble: Ensemble,
    pub starts: Dataset,
    pub designs: Vec<AlgorithmDesigns>,
}

/// Builds the task named by the config.
pub fn load_task(cfg: &ExperimentConfig, seed: u64) -> Result<TaskSpec> {
    if let Some(csv) = &cfg.dataset {
        return ingest_csv(csv, &meta_path(csv));
    }
    match (cfg.task.as_str(), cfg.dim) {
        ("ridge", Some(d)) => make_ridge(seed, d),
        ("bowl", Some(d)) => make_bowl(seed, d),
        (name, _) => make_task(name, seed),
    }
}

/// The offline part of a run: MBO dataset, normalized space, trained ensemble
/// and starting designs. Never touches the oracle.
pub struct OfflineSetup {
    pub space: DesignSpace,
    pub mbo: Dataset,
    pub ensemble: Ensemble,
    pub starts: Dataset,
}

pub fn train_config_for(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.train.clone()
    }
}

/// Bottom-K selection, normalization fit and MBO dataset; no training.
pub fn mbo_dataset(task: &TaskSpec, k: f64) -> Result<Dataset> {
    let mbo = task.total().select_bottom_fraction(k)?;
    let refs: Vec<&Design> = mbo.designs().iter().collect();
    let space = mbo.space().fitted_to(&refs)?;
    mbo.with_space(space)
}

pub fn prepare(task: &TaskSpec, cfg: &ExperimentConfig, seed: u64) -> Result<OfflineSetup> {
    let mbo = mbo_dataset(task, cfg.k).map_err(|e| e.in_stage("select"))?;
    let starts = mbo
        .select_top_n(cfg.n_candidates)
        .map_err(|e| e.in_stage("select"))?;
    let ensemble = train_ensemble(&mbo, cfg.ensemble_size, &train_config_for(cfg, seed))
        .map_err(|e| e.in_stage("train"))?;
    Ok(OfflineSetup {
        space: mbo.space().clone(),
        mbo,
        ensemble,
        starts,
    })
}

/// Mean prediction of the ensemble at each point.
pub fn ensemble_mean_predictions(ensemble: &Ensemble, points: &[DesignPoint]) -> Result<Vec<f64>> {
    let m = ensemble.len() as f64;
    points
        .iter()
        .map(|p| {
            let mut s = 0.0;
            for model in ensemble.models() {
                s += model.predict(p.as_slice())?;
            }
            Ok(s / m)
        })
        .collect()
}

/// Runs one seed of the experiment in memory.
pub fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    cfg.validate()?;
    let t0 = Instant::now();
    let task = load_task(cfg, seed).map_err(|e| e.in_stage("task"))?;
    if !task.has_oracle() {
        log::warn!(
            "task `{}` has no oracle; reporting proxy predictions, unverified",
            task.name()
        );
    }
    let calls_before = task.oracle_calls();
    let setup_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let OfflineSetup {
        space,
        mbo,
        ensemble,
        starts,
    } = prepare(&task, cfg, seed)?;
    let train_secs = t1.elapsed().as_secs_f64();
    let training_calls = task.oracle_calls() - calls_before;

    let start_points = starts.encoded();
    let mut designs = Vec::with_capacity(cfg.algorithms.len());
    let mut algorithm_secs = Vec::with_capacity(cfg.algorithms.len());
    let mut trajectories: Vec<(Combiner, Vec<Trajectory>)> = Vec::new();
    for &alg in &cfg.algorithms {
        let ta = Instant::now();
        let trajs = ascend_batch(&start_points, ensemble.models(), &space, &cfg.ascent_for(alg))
            .map_err(|e| e.in_stage("ascent"))?;
        algorithm_secs.push((alg, ta.elapsed().as_secs_f64()));
        trajectories.push((alg, trajs));
    }

    let calls_before_eval = task.oracle_calls();
    for (alg, trajs) in trajectories {
        let final_designs: Vec<Design> = trajs.iter().map(|t| t.final_design.clone()).collect();
        let scores = if task.has_oracle() {
            task.evaluate_oracle(&final_designs)
        } else {
            let points: Vec<DesignPoint> = trajs.into_iter().map(|t| t.final_point).collect();
            ensemble_mean_predictions(&ensemble, &points)
        }
        .map_err(|e| e.in_stage("evaluate"))?;
        designs.push(AlgorithmDesigns {
            algorithm: alg,
            designs: final_designs,
            scores,
        });
    }
    let evaluation_calls = task.oracle_calls() - calls_before_eval;

    let (y_min, y_max) = (task.y_min(), task.y_max());
    let algorithms = designs
        .iter()
        .map(|d| {
            Ok(AlgorithmReport {
                algorithm: d.algorithm,
                summary: summarize_scores(&d.scores)?.with_range(y_min, y_max)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("summarize"))?;
    let max_raw = mbo.max_y().ok_or(Error::Empty("MBO dataset"))?;
    let baseline = DatasetBaseline {
        max_raw,
        max_normalized: normalize_score(max_raw, y_min, y_max)?,
    };
    let members = ensemble
        .metrics()
        .iter()
        .enumerate()
        .map(|(index, m)| MemberReport {
            index,
            val_mse: m.mse,
            val_spearman: m.spearman,
        })
        .collect();
    let report = RunReport {
        task: task.name().to_string(),
        seed,
        verified: task.has_oracle(),
        k: cfg.k,
        mbo_size: mbo.len(),
        ensemble_size: cfg.ensemble_size,
        n_candidates: cfg.n_candidates,
        steps: cfg.ascent.steps,
        step_size: cfg.step_size(),
        cagrad_c: cfg.cagrad_c(),
        y_min,
        y_max,
        baseline,
        members,
        algorithms,
        oracle_calls: OracleCalls {
            training: training_calls,
            evaluation: evaluation_calls,
        },
    };
    let timing = Timing {
        setup_secs,
        train_secs,
        algorithms: algorithm_secs,
        total_secs: t0.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        report,
        timing,
        task,
        ensemble,
        starts,
        designs,
    })
}

/// Name of the per-run output directory.
pub fn run_dir_name(task: &str, seed: u64) -> String {
    format!("{task}-seed{seed}")
}

/// Runs one seed and writes its artifacts under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let outcome = execute(cfg, cfg.seed)?;
    let dir = cfg.out.join(run_dir_name(&outcome.report.task, cfg.seed));
    super::persist::write_run(&dir, cfg, &outcome).map_err(|e| e.in_stage("persist"))?;
    Ok(outcome.report)
}

/// Runs every configured seed, writing per-seed artifacts and an aggregate.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    let mut reports = Vec::new();
    for seed in cfg.run_seeds() {
        let single = ExperimentConfig {
            seed,
            seeds: Vec::new(),
            ..cfg.clone()
        };
        reports.push(run_experiment(&single)?);
    }
    if reports.len() > 1 {
        let dir = cfg.out.join(format!("{}-aggregate", reports[0].task));
        super::persist::write_aggregate(&dir, &reports).map_err(|e| e.in_stage("persist"))?;
    }
    Ok(reports)
}

/// Result of an offline tuning pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TuneSummary {
    pub files: usize,
    /// Oracle queries made during tuning; always zero.
    pub oracle_calls: u64,
}

/// Writes per-trajectory CSVs of proxy predictions for offline step-size
/// selection.
pub fn tune(cfg: &ExperimentConfig, n_trajectories: usize, out: &Path) -> Result<TuneSummary> {
    cfg.validate()?;
    let task = load_task(cfg, cfg.seed).map_err(|e| e.in_stage("task"))?;
    let setup = prepare(&task, cfg, cfg.seed)?;
    let n = n_trajectories.clamp(1, setup.starts.len());
    let starts: Vec<DesignPoint> = setup.starts.encoded().into_iter().take(n).collect();
    std::fs::create_dir_all(out)?;
    let mut files = 0;
    for &alg in &cfg.algorithms {
        let mut acfg = cfg.ascent_for(alg);
        acfg.record_trajectory = true;
        let trajs = ascend_batch(&starts, setup.ensemble.models(), &setup.space, &acfg)
            .map_err(|e| e.in_stage("ascent"))?;
        for (i, t) in trajs.iter().enumerate() {
            let path = out.join(format!("trajectory_{}_{i:03}.csv", alg.key()));
            super::persist::write_trajectory(&path, t)?;
            files += 1;
        }
    }
    Ok(TuneSummary {
        files,
        oracle_calls: task.oracle_calls(),
    })
}
