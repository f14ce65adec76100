use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ensemble_mbo::combine::Combiner;
use ensemble_mbo::harness::{
    aggregate, aggregate_markdown, load_task, mbo_dataset, read_report, report_markdown,
    run_dir_name, run_seeds, train_config_for, tune, ExperimentConfig,
};
use ensemble_mbo::nn::train_ensemble;

#[derive(Parser)]
#[command(name = "ensemble-mbo", version, about = "Ensemble gradient ascent for offline model-based optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a task's total dataset as CSV plus metadata.
    GenTask(Common),
    /// Train and save the proxy ensemble; print validation metrics.
    Train(Common),
    /// Write proxy-prediction trajectories for offline step-size selection.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Number of starting designs to trace per algorithm.
        #[arg(long, default_value_t = 8)]
        trajectories: usize,
    },
    /// Run the full experiment and print the report.
    Run(Common),
    /// Render reports from stored run directories.
    Report {
        /// Run directories containing report.json.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the markdown here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    /// External dataset CSV (metadata sidecar alongside) instead of a synthetic task.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Dimension of continuous synthetic tasks.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated seeds for a multi-seed run.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Fraction of lowest-scoring designs kept for training.
    #[arg(long)]
    k: Option<f64>,
    /// Ensemble size.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Restrict to these algorithms (repeatable).
    #[arg(long)]
    combiner: Vec<Combiner>,
    #[arg(long = "cagrad-c")]
    cagrad_c: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(t) = &self.task {
            cfg.task = t.clone();
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
            if self.task.is_none() {
                cfg.task = d
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("external")
                    .to_string();
            }
        }
        if self.dim.is_some() {
            cfg.dim = self.dim;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(m) = self.m {
            cfg.ensemble_size = m;
        }
        if self.alpha.is_some() {
            cfg.ascent.step_size = self.alpha;
        }
        if let Some(s) = self.steps {
            cfg.ascent.steps = s;
        }
        if !self.combiner.is_empty() {
            cfg.algorithms = self.combiner.clone();
        }
        if self.cagrad_c.is_some() {
            cfg.ascent.cagrad_c = self.cagrad_c;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn gen_task(c: &Common) -> anyhow::Result<()> {
    let cfg = c.config()?;
    let task = load_task(&cfg, cfg.seed)?;
    std::fs::create_dir_all(&cfg.out)?;
    let csv = cfg.out.join(format!("{}.csv", run_dir_name(task.name(), cfg.seed)));
    task.export(&csv)
        .with_context(|| format!("writing {}", csv.display()))?;
    println!("{} rows -> {}", task.total_size(), csv.display());
    Ok(())
}

fn train(c: &Common) -> anyhow::Result<()> {
    let cfg = c.config()?;
    let task = load_task(&cfg, cfg.seed)?;
    let mbo = mbo_dataset(&task, cfg.k)?;
    let ens = train_ensemble(&mbo, cfg.ensemble_size, &train_config_for(&cfg, cfg.seed))?;
    let dir = cfg.out.join(run_dir_name(task.name(), cfg.seed)).join("ensemble");
    ens.save(&dir)?;
    for (i, m) in ens.metrics().iter().enumerate() {
        let rho = m
            .spearman
            .map_or_else(|| "undefined".to_string(), |s| format!("{s:.4}"));
        println!("model {i}: val_mse={:.6} spearman={rho}", m.mse);
    }
    println!("saved {}", dir.display());
    Ok(())
}

fn tune_cmd(c: &Common, trajectories: usize) -> anyhow::Result<()> {
    let cfg = c.config()?;
    let task_name = cfg.task.clone();
    let dir = cfg.out.join(run_dir_name(&task_name, cfg.seed)).join("tune");
    let summary = tune(&cfg, trajectories, &dir)?;
    if summary.oracle_calls != 0 {
        bail!("tuning queried the oracle {} times", summary.oracle_calls);
    }
    println!("{} trajectory files -> {}", summary.files, dir.display());
    Ok(())
}

fn run(c: &Common) -> anyhow::Result<()> {
    let cfg = c.config()?;
    let reports = run_seeds(&cfg)?;
    if let [r] = reports.as_slice() {
        print!("{}", report_markdown(r));
    } else {
        print!("{}", aggregate_markdown(&[aggregate(&reports)?]));
    }
    for r in &reports {
        println!(
            "\nartifacts: {}",
            cfg.out.join(run_dir_name(&r.task, r.seed)).display()
        );
    }
    Ok(())
}

fn report(dirs: &[PathBuf], output: Option<&PathBuf>) -> anyhow::Result<()> {
    let mut reports = Vec::new();
    for d in dirs {
        reports.push(read_report(d).with_context(|| format!("reading {}", d.display()))?);
    }
    let text = if let [r] = reports.as_slice() {
        report_markdown(r)
    } else {
        let mut tasks: Vec<String> = Vec::new();
        for r in &reports {
            if !tasks.contains(&r.task) {
                tasks.push(r.task.clone());
            }
        }
        let aggs = tasks
            .iter()
            .map(|t| {
                let group: Vec<_> = reports.iter().filter(|r| &r.task == t).cloned().collect();
                aggregate(&group)
            })
            .collect::<Result<Vec<_>, _>>()?;
        aggregate_markdown(&aggs)
    };
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenTask(c) => gen_task(c),
        Command::Train(c) => train(c),
        Command::Tune {
            common,
            trajectories,
        } => tune_cmd(common, *trajectories),
        Command::Run(c) => run(c),
        Command::Report { dirs, output } => report(dirs, output.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
