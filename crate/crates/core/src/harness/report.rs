//! Markdown tables and multi-seed aggregation.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::run::RunReport;
use crate::combine::Combiner;
use crate::error::{Error, Result};

pub const TIE_RULE: &str = "Best value per column in **bold**, second best in *italics*. \
Values are compared unrounded; equal values share a mark. The dataset row is not ranked.";

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: Combiner,
    pub max_normalized: Stat,
    pub p50_normalized: Stat,
    pub mean_raw: Stat,
    pub mean_normalized: Stat,
    pub p50_raw: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub task: String,
    pub seeds: Vec<u64>,
    pub verified: bool,
    pub baseline_normalized: Stat,
    pub rows: Vec<AggregateRow>,
}

impl AggregateReport {
    pub fn row(&self, c: Combiner) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.algorithm == c)
    }
}

/// Combines per-seed reports of one task.
pub fn aggregate(reports: &[RunReport]) -> Result<AggregateReport> {
    let first = reports.first().ok_or(Error::Empty("run reports"))?;
    if reports.iter().any(|r| r.task != first.task) {
        return Err(Error::InvalidArgument("reports span several tasks".into()));
    }
    let algs: Vec<Combiner> = first.algorithms.iter().map(|a| a.algorithm).collect();
    if reports
        .iter()
        .any(|r| r.algorithms.iter().map(|a| a.algorithm).ne(algs.iter().copied()))
    {
        return Err(Error::InvalidArgument("reports differ in algorithms".into()));
    }
    let collect = |f: &dyn Fn(&RunReport) -> f64| -> Stat {
        Stat::of(&reports.iter().map(f).collect::<Vec<_>>())
    };
    let rows = algs
        .iter()
        .enumerate()
        .map(|(i, &alg)| {
            let norm = |r: &RunReport| r.algorithms[i].summary.normalized.expect("normalized");
            AggregateRow {
                algorithm: alg,
                max_normalized: collect(&|r| norm(r).max),
                p50_normalized: collect(&|r| norm(r).p50),
                mean_raw: collect(&|r| r.algorithms[i].summary.raw.mean),
                mean_normalized: collect(&|r| norm(r).mean),
                p50_raw: collect(&|r| r.algorithms[i].summary.raw.p50),
            }
        })
        .collect();
    Ok(AggregateReport {
        task: first.task.clone(),
        seeds: reports.iter().map(|r| r.seed).collect(),
        verified: reports.iter().all(|r| r.verified),
        baseline_normalized: collect(&|r| r.baseline.max_normalized),
        rows,
    })
}

#[derive(Clone, Copy)]
struct Cell {
    value: f64,
    std: Option<f64>,
}

impl Cell {
    fn text(self) -> String {
        match self.std {
            Some(s) => format!("{:.3} ± {:.3}", self.value, s),
            None => format!("{:.3}", self.value),
        }
    }
}

#[derive(Clone, Copy)]
enum Metric {
    MaxNorm,
    P50Norm,
    MeanRaw,
    MeanNorm,
}

impl Metric {
    const ALL: [Metric; 4] = [Metric::MaxNorm, Metric::P50Norm, Metric::MeanRaw, Metric::MeanNorm];

    fn title(self) -> &'static str {
        match self {
            Metric::MaxNorm => "Max score (normalized)",
            Metric::P50Norm => "50th percentile score (normalized)",
            Metric::MeanRaw => "Average score (raw)",
            Metric::MeanNorm => "Average score (normalized, supplementary)",
        }
    }
}

/// One task column: baseline plus a cell per algorithm and metric.
struct Column {
    title: String,
    baseline: Cell,
    cells: Vec<(Combiner, [Cell; 4])>,
}

impl Column {
    fn from_run(r: &RunReport) -> Self {
        let cells = r
            .algorithms
            .iter()
            .map(|a| {
                let n = a.summary.normalized.expect("normalized");
                let c = |v| Cell { value: v, std: None };
                (
                    a.algorithm,
                    [c(n.max), c(n.p50), c(a.summary.raw.mean), c(n.mean)],
                )
            })
            .collect();
        Self {
            title: r.task.clone(),
            baseline: Cell {
                value: r.baseline.max_normalized,
                std: None,
            },
            cells,
        }
    }

    fn from_aggregate(a: &AggregateReport) -> Self {
        let c = |s: Stat| Cell {
            value: s.mean,
            std: Some(s.std),
        };
        Self {
            title: a.task.clone(),
            baseline: c(a.baseline_normalized),
            cells: a
                .rows
                .iter()
                .map(|r| {
                    (
                        r.algorithm,
                        [
                            c(r.max_normalized),
                            c(r.p50_normalized),
                            c(r.mean_raw),
                            c(r.mean_normalized),
                        ],
                    )
                })
                .collect(),
        }
    }

    fn get(&self, alg: Combiner, metric: usize) -> Option<Cell> {
        self.cells
            .iter()
            .find(|(c, _)| *c == alg)
            .map(|(_, cells)| cells[metric])
    }
}

/// Rank marks for one column: best values bold, second-best italic.
fn marks(values: &[Option<f64>]) -> Vec<&'static str> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let best = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let second = present
        .iter()
        .copied()
        .filter(|&v| v < best)
        .fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| match v {
            Some(v) if *v == best => "**",
            Some(v) if *v == second => "*",
            _ => "",
        })
        .collect()
}

fn render(heading: &str, intro: &[String], columns: &[Column]) -> String {
    let mut rows: Vec<Combiner> = Vec::new();
    for col in columns {
        for (c, _) in &col.cells {
            if !rows.contains(c) {
                rows.push(*c);
            }
        }
    }
    let mut out = String::new();
    writeln!(out, "# {heading}\n").unwrap();
    for line in intro {
        writeln!(out, "{line}").unwrap();
    }
    for (mi, metric) in Metric::ALL.iter().enumerate() {
        writeln!(out, "\n## {}\n", metric.title()).unwrap();
        write!(out, "| Algorithm |").unwrap();
        for col in columns {
            write!(out, " {} |", col.title).unwrap();
        }
        write!(out, "\n|---|").unwrap();
        for _ in columns {
            write!(out, "---:|").unwrap();
        }
        out.push('\n');
        let marked: Vec<Vec<&str>> = columns
            .iter()
            .map(|col| marks(&rows.iter().map(|&r| col.get(r, mi).map(|c| c.value)).collect::<Vec<_>>()))
            .collect();
        if matches!(metric, Metric::MaxNorm) {
            write!(out, "| dataset |").unwrap();
            for col in columns {
                write!(out, " {} |", col.baseline.text()).unwrap();
            }
            out.push('\n');
        }
        for (ri, &alg) in rows.iter().enumerate() {
            write!(out, "| {} |", alg.label()).unwrap();
            for (ci, col) in columns.iter().enumerate() {
                match col.get(alg, mi) {
                    Some(cell) => {
                        let m = marked[ci][ri];
                        write!(out, " {m}{}{m} |", cell.text()).unwrap();
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
    }
    writeln!(out, "\n{TIE_RULE}").unwrap();
    out
}

fn unverified_note(verified: bool) -> Option<String> {
    (!verified).then(|| {
        "**Unverified:** the task has no oracle; scores are ensemble-mean proxy predictions."
            .to_string()
    })
}

/// Markdown tables for one run.
pub fn report_markdown(r: &RunReport) -> String {
    let mut intro = vec![format!(
        "{} designs per algorithm, {} ascent steps of size {}, CAGrad c = {}. \
MBO dataset: lowest {} of the total dataset ({} designs); ensemble of {}.",
        r.n_candidates,
        r.steps,
        r.step_size,
        r.cagrad_c,
        r.k,
        r.mbo_size,
        r.ensemble_size
    )];
    intro.extend(unverified_note(r.verified));
    let mut out = render(
        &format!("Results: {} (seed {})", r.task, r.seed),
        &intro,
        &[Column::from_run(r)],
    );
    out.push_str("\n## Proxy validation\n\n| Member | MSE | Spearman |\n|---:|---:|---:|\n");
    for m in &r.members {
        let rho = m
            .val_spearman
            .map_or_else(|| "-".to_string(), |s| format!("{s:.3}"));
        writeln!(out, "| {} | {:.4} | {} |", m.index, m.val_mse, rho).unwrap();
    }
    out
}

/// Markdown tables with one column per task, mean ± std over seeds.
pub fn aggregate_markdown(aggs: &[AggregateReport]) -> String {
    let mut intro: Vec<String> = aggs
        .iter()
        .map(|a| {
            let seeds: Vec<String> = a.seeds.iter().map(|s| s.to_string()).collect();
            format!("{}: mean ± std over seeds {}.", a.task, seeds.join(", "))
        })
        .collect();
    intro.extend(unverified_note(aggs.iter().all(|a| a.verified)));
    let columns: Vec<Column> = aggs.iter().map(Column::from_aggregate).collect();
    render("Aggregated results", &intro, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marks_share_ties_and_skip_missing() {
        assert_eq!(marks(&[Some(1.0)]), vec!["**"]);
        assert_eq!(
            marks(&[Some(2.0), Some(3.0), Some(3.0), None, Some(1.0)]),
            vec!["*", "**", "**", "", ""]
        );
        assert_eq!(marks(&[Some(0.5), Some(0.5)]), vec!["**", "**"]);
    }

    #[test]
    fn stat_uses_sample_std() {
        let s = Stat::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[4.0]).std, 0.0);
    }
}
