use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate score range: y_min = {y_min}, y_max = {y_max}")]
    DegenerateRange { y_min: f64, y_max: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constant input: rank variance is zero")]
    ConstantInput,

    #[error("training diverged at epoch {epoch}: loss is NaN")]
    TrainingDiverged { epoch: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("problem dimension {dim} too large for the reference solver (max {max}); use the dual solver")]
    TooLarge { dim: usize, max: usize },

    #[error("must harden before oracle: design {index} is not a valid one-hot")]
    NotHard { index: usize },

    #[error("task `{0}` has no oracle")]
    NoOracle(String),

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("NaN encountered at ascent step {step}")]
    AscentNaN { step: usize },

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("metadata: {0}")]
    Metadata(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
