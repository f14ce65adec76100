//! End-to-end experiments: data selection, proxy training, ascent with every
//! algorithm, oracle scoring and reports.

mod config;
mod persist;
mod report;
mod run;

pub use config::{default_out_dir, task_defaults, AscentSettings, ExperimentConfig, DEFAULT_OUT, OUT_ENV};
pub use persist::{designs_file, read_report, write_aggregate, write_trajectory, AGGREGATE_JSON, REPORT_JSON};
pub use report::{aggregate, aggregate_markdown, report_markdown, AggregateReport, AggregateRow, Stat, TIE_RULE};
pub use run::{
    ensemble_mean_predictions, execute, load_task, mbo_dataset, prepare, run_dir_name,
    run_experiment, run_seeds, train_config_for, tune, AlgorithmDesigns, AlgorithmReport,
    DatasetBaseline, MemberReport, OfflineSetup, OracleCalls, RunOutcome, RunReport, Timing,
    TuneSummary,
};
