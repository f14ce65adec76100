//! On-disk layout of a run directory:
//!
//! - `config.toml`: effective configuration
//! - `report.json`, `report.md`: results
//! - `timing.json`: wall-clock seconds
//! - `starts.csv`: starting designs with dataset scores
//! - `designs_<algorithm>.csv`: final designs with their scores
//! - `ensemble/`: serialized proxies

use std::fs;
use std::path::Path;

use super::config::ExperimentConfig;
use super::report::{aggregate, aggregate_markdown, report_markdown, AggregateReport};
use super::run::{RunOutcome, RunReport};
use crate::ascent::Trajectory;
use crate::combine::Combiner;
use crate::dataset::{meta_path, Dataset};
use crate::error::Result;

pub const REPORT_JSON: &str = "report.json";
pub const AGGREGATE_JSON: &str = "aggregate.json";

pub fn designs_file(alg: Combiner) -> String {
    format!("designs_{}.csv", alg.key())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_run(dir: &Path, cfg: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    let effective = ExperimentConfig {
        seed: outcome.report.seed,
        seeds: Vec::new(),
        ..cfg.clone()
    };
    fs::write(dir.join("config.toml"), effective.to_toml())?;
    write_json(&dir.join(REPORT_JSON), &outcome.report)?;
    fs::write(dir.join("report.md"), report_markdown(&outcome.report))?;
    write_json(&dir.join("timing.json"), &outcome.timing)?;
    let task_space = outcome.task.space().clone();
    let meta = outcome.task.meta();
    let starts = outcome.starts.with_space(task_space.clone())?;
    starts.write_csv(&dir.join("starts.csv"))?;
    meta.write(&meta_path(&dir.join("starts.csv")))?;
    for d in &outcome.designs {
        let data = Dataset::new(task_space.clone(), d.designs.clone(), d.scores.clone())?;
        let path = dir.join(designs_file(d.algorithm));
        data.write_csv(&path)?;
        meta.write(&meta_path(&path))?;
    }
    outcome.ensemble.save(&dir.join("ensemble"))
}

pub fn write_aggregate(dir: &Path, reports: &[RunReport]) -> Result<AggregateReport> {
    fs::create_dir_all(dir)?;
    let agg = aggregate(reports)?;
    write_json(&dir.join(AGGREGATE_JSON), &agg)?;
    fs::write(dir.join("aggregate.md"), aggregate_markdown(std::slice::from_ref(&agg)))?;
    Ok(agg)
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(dir.join(REPORT_JSON))?;
    Ok(serde_json::from_str(&text)?)
}

/// Trajectory dump: `step, pred_1..pred_m, d_norm`.
pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let m = t.states.first().map_or(0, |s| s.predictions.len());
    let mut header = vec!["step".to_string()];
    header.extend((1..=m).map(|i| format!("pred_{i}")));
    header.push("d_norm".into());
    w.write_record(&header)?;
    for (step, s) in t.states.iter().enumerate() {
        let mut rec = vec![step.to_string()];
        rec.extend(s.predictions.iter().map(|p| format!("{p:?}")));
        rec.push(format!("{:?}", s.d_norm));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
