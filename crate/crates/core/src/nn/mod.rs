//! Proxy models: fully connected regressors, their training, and ensembles.

mod ensemble;
mod mlp;
mod train;

pub use ensemble::{fold_partition, train_ensemble, Ensemble};
pub use mlp::{Layer, MlpModel};
pub use train::{train, train_split, TrainConfig, TrainedModel, ValMetrics};

pub use crate::metrics::spearman;

use crate::error::Result;

/// Anything that predicts a scalar score and its input gradient.
pub trait Proxy: Sync {
    fn input_dim(&self) -> usize;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_and_gradient(x)?.0)
    }
}

impl Proxy for MlpModel {
    fn input_dim(&self) -> usize {
        MlpModel::input_dim(self)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.value_and_input_gradient(x)
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.forward(x)
    }
}
