use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{axpy, dot, MlpModel};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::spearman;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            epochs: 20,
            batch_size: 128,
            learning_rate: 1e-3,
            weight_decay: 1e-6,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::InvalidArgument(
                "epochs, batch_size and patience must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive and weight decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Validation metrics at the best epoch. `spearman` is `None` when either
/// side has no rank variance (e.g. a constant target).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    pub mse: f64,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub val: ValMetrics,
    pub best_epoch: usize,
    pub train_mse: f64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Trains on `data` with a seeded 90/10 train/validation split.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    let (train_idx, val_idx) = holdout_split(data.len(), cfg.seed)?;
    train_split(&data.subset(&train_idx), &data.subset(&val_idx), cfg)
}

/// Seeded 90/10 split used when a model has no fold partners.
pub(crate) fn holdout_split(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "need at least two samples for a train/validation split".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n / 10).max(1);
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

/// Trains on `train`, early-stopping on validation MSE over `val`.
pub fn train_split(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if train.len() < cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "training set ({}) smaller than batch size ({})",
            train.len(),
            cfg.batch_size
        )));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let dim = train.space().input_dim();
    let x_train = flatten(train);
    let x_val = flatten(val);

    // Standardize targets; the affine map is folded into the output layer.
    let n = train.len() as f64;
    let y_mean = train.ys().iter().sum::<f64>() / n;
    let y_var = train.ys().iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n;
    let y_scale = if y_var > 1e-24 { y_var.sqrt() } else { 1.0 };
    let targets: Vec<f64> = train.ys().iter().map(|y| (y - y_mean) / y_scale).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(dim, &cfg.hidden, &mut rng)?;
    let mut adam = Adam::new(&model);
    let mut ws = Workspace::new(&model, cfg.batch_size);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best: Option<(f64, MlpModel, usize, f64)> = None;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let loss = ws.step(&mut model, &mut adam, &x_train, dim, &targets, batch, cfg);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
        }
        let train_mse = loss_sum / n * y_scale * y_scale;

        let val_mse = mse_on(&model, &x_val, dim, val.ys(), y_mean, y_scale);
        if !val_mse.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        match &best {
            Some((b, ..)) if val_mse >= *b => {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
            _ => {
                stale = 0;
                best = Some((val_mse, model.clone(), epoch, train_mse));
            }
        }
    }

    let (_, mut model, best_epoch, train_mse) = best.expect("at least one epoch runs");
    fold_output_scale(&mut model, y_mean, y_scale);
    let preds: Vec<f64> = x_val
        .chunks(dim)
        .map(|x| model.forward(x))
        .collect::<Result<_>>()?;
    let mse = preds
        .iter()
        .zip(val.ys())
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / val.len() as f64;
    let rho = if val.len() >= 2 {
        spearman(&preds, val.ys()).ok()
    } else {
        None
    };
    Ok(TrainedModel {
        model,
        val: ValMetrics { mse, spearman: rho },
        best_epoch,
        train_mse,
    })
}

fn flatten(data: &Dataset) -> Vec<f64> {
    data.encoded().into_iter().flat_map(|p| p.0).collect()
}

fn mse_on(model: &MlpModel, x: &[f64], dim: usize, ys: &[f64], mean: f64, scale: f64) -> f64 {
    let mut s = 0.0;
    for (row, y) in x.chunks(dim).zip(ys) {
        let p = model.forward(row).unwrap_or(f64::NAN) * scale + mean;
        s += (p - y).powi(2);
    }
    s / ys.len() as f64
}

fn fold_output_scale(model: &mut MlpModel, mean: f64, scale: f64) {
    let last = model.layers_mut().last_mut().expect("non-empty");
    last.weights.iter_mut().for_each(|w| *w *= scale);
    last.bias[0] = last.bias[0] * scale + mean;
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    /// One moment buffer per layer: weights followed by bias.
    fn new(model: &MlpModel) -> Self {
        let sizes: Vec<usize> = model
            .layers()
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .collect();
        Self {
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            t: 0,
        }
    }

    fn update(&mut self, model: &mut MlpModel, grads: &[Vec<f64>], lr: f64, wd: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (li, layer) in model.layers_mut().iter_mut().enumerate() {
            let nw = layer.weights.len();
            let (m, v, g) = (&mut self.m[li], &mut self.v[li], &grads[li]);
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            for (i, p) in params.enumerate() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let step = (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                let decay = if i < nw { wd * *p } else { 0.0 };
                *p -= lr * (step + decay);
            }
        }
    }
}

/// Reusable per-batch buffers for forward/backward passes.
struct Workspace {
    /// `acts[i]` is the input of layer `i`, row-major `batch x width`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    grads: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(model: &MlpModel, batch: usize) -> Self {
        let layers = model.layers();
        let widest = layers.iter().map(|l| l.n_in.max(l.n_out)).max().unwrap_or(1);
        Self {
            acts: layers.iter().map(|l| vec![0.0; batch * l.n_in]).collect(),
            pre: layers.iter().map(|l| vec![0.0; batch * l.n_out]).collect(),
            delta: vec![0.0; batch * widest],
            delta_prev: vec![0.0; batch * widest],
            grads: layers
                .iter()
                .map(|l| vec![0.0; l.weights.len() + l.bias.len()])
                .collect(),
        }
    }

    /// One minibatch update; returns the batch MSE before the update.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        model: &mut MlpModel,
        adam: &mut Adam,
        x: &[f64],
        dim: usize,
        targets: &[f64],
        batch: &[usize],
        cfg: &TrainConfig,
    ) -> f64 {
        let b = batch.len();
        let n_layers = model.layers().len();
        for (r, &i) in batch.iter().enumerate() {
            self.acts[0][r * dim..(r + 1) * dim].copy_from_slice(&x[i * dim..(i + 1) * dim]);
        }
        for (li, layer) in model.layers().iter().enumerate() {
            let (n_in, n_out) = (layer.n_in, layer.n_out);
            for r in 0..b {
                let input = &self.acts[li][r * n_in..(r + 1) * n_in];
                let out = &mut self.pre[li][r * n_out..(r + 1) * n_out];
                layer.affine(input, out);
            }
            if li + 1 < n_layers {
                let next = &mut self.acts[li + 1][..b * n_out];
                for (a, z) in next.iter_mut().zip(&self.pre[li][..b * n_out]) {
                    *a = z.max(0.0);
                }
            }
        }

        let mut loss = 0.0;
        let out = &self.pre[n_layers - 1];
        for r in 0..b {
            let e = out[r] - targets[batch[r]];
            loss += e * e;
            self.delta[r] = 2.0 * e / b as f64;
        }
        loss /= b as f64;

        for (li, layer) in model.layers().iter().enumerate().rev() {
            let (n_in, n_out) = (layer.n_in, layer.n_out);
            let g = &mut self.grads[li];
            g.iter_mut().for_each(|v| *v = 0.0);
            let (gw, gb) = g.split_at_mut(n_in * n_out);
            for r in 0..b {
                let d = &self.delta[r * n_out..(r + 1) * n_out];
                axpy(1.0, d, gb);
                let input = &self.acts[li][r * n_in..(r + 1) * n_in];
                for (k, &a) in input.iter().enumerate() {
                    if a != 0.0 {
                        axpy(a, d, &mut gw[k * n_out..(k + 1) * n_out]);
                    }
                }
            }
            if li > 0 {
                let pre_prev = &self.pre[li - 1];
                for r in 0..b {
                    let d = &self.delta[r * n_out..(r + 1) * n_out];
                    for k in 0..n_in {
                        self.delta_prev[r * n_in + k] = if pre_prev[r * n_in + k] > 0.0 {
                            dot(&layer.weights[k * n_out..(k + 1) * n_out], d)
                        } else {
                            0.0
                        };
                    }
                }
                std::mem::swap(&mut self.delta, &mut self.delta_prev);
            }
        }
        adam.update(model, &self.grads, cfg.learning_rate, cfg.weight_decay);
        loss
    }
}
