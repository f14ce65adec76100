//! Gradient ascent on designs against an ensemble of proxies.
//!
//! Each step evaluates every proxy's value and input gradient at the current
//! point, combines the gradients into one direction `d`, and moves
//! `x ← x + α·d`. Continuous designs are optimized in standardized
//! coordinates; discrete designs in relaxed one-hot space, hardened by
//! per-position argmax when the run ends.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{combine, CagradConfig, Combiner, GradientSet, SolverOptions};
use crate::error::{Error, Result};
use crate::nn::Proxy;
use crate::space::{Design, DesignPoint, DesignSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub steps: usize,
    pub step_size: f64,
    pub combiner: Combiner,
    pub cagrad_c: f64,
    pub record_trajectory: bool,
    /// Re-harden discrete designs after every update instead of only at the end.
    pub harden_every_step: bool,
    /// Rescale each model's gradient to unit norm before combining.
    pub normalize_gradients: bool,
    /// Optional bound on the Euclidean norm of continuous (standardized) iterates.
    pub clip_radius: Option<f64>,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            step_size: 0.1,
            combiner: Combiner::Mean,
            cagrad_c: 0.5,
            record_trajectory: false,
            harden_every_step: false,
            normalize_gradients: false,
            clip_radius: None,
            solver: SolverOptions::default(),
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        CagradConfig::new(self.cagrad_c)?;
        if let Some(r) = self.clip_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("clip radius must be positive".into()));
            }
        }
        Ok(())
    }
}

/// State before step `k` (or after the last step when `k == steps`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub x: Vec<f64>,
    pub predictions: Vec<f64>,
    pub d_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `steps + 1` states when recording, empty otherwise.
    pub states: Vec<TrajectoryState>,
    /// Norm of the combined direction at every step.
    pub d_norms: Vec<f64>,
    /// Norm of the combined direction at the final relaxed iterate.
    pub final_d_norm: f64,
    /// Final relaxed iterate in optimization representation.
    pub final_relaxed: Vec<f64>,
    /// Final hardened point in optimization representation.
    pub final_point: DesignPoint,
    /// Final design in task units.
    pub final_design: Design,
}

/// Per-position argmax of a relaxed one-hot vector; ties go to the lowest token.
pub fn harden_discrete(x: &[f64], space: &DesignSpace) -> Result<DesignPoint> {
    let DesignSpace::Discrete { vocab, .. } = space else {
        return Err(Error::InvalidArgument(
            "hardening applies to discrete spaces only".into(),
        ));
    };
    if x.len() != space.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.input_dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("relaxed design"));
    }
    let mut out = vec![0.0; x.len()];
    for (p, block) in x.chunks(*vocab).enumerate() {
        let mut best = 0;
        for (i, &v) in block.iter().enumerate() {
            if v > block[best] {
                best = i;
            }
        }
        out[p * vocab + best] = 1.0;
    }
    Ok(DesignPoint(out))
}

struct Evaluation {
    predictions: Vec<f64>,
    d: Vec<f64>,
}

fn evaluate<P: Proxy>(x: &[f64], models: &[P], cfg: &AscentConfig) -> Result<Evaluation> {
    let used = if cfg.combiner.uses_single_model() {
        &models[..1]
    } else {
        models
    };
    let mut values = Vec::with_capacity(used.len());
    let mut grads = Vec::with_capacity(used.len());
    for m in used {
        let (v, g) = m.value_and_gradient(x)?;
        values.push(v);
        grads.push(g);
    }
    let mut gs = GradientSet::new(grads)?.with_values(values.clone())?;
    if cfg.normalize_gradients {
        gs = gs.normalized();
    }
    let combined = combine(
        cfg.combiner,
        &gs,
        CagradConfig { c: cfg.cagrad_c },
        &cfg.solver,
    )?;
    Ok(Evaluation {
        predictions: values,
        d: combined.d,
    })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs `cfg.steps` ascent updates from `start`.
///
/// `SingleModel` consults only `models[0]`.
pub fn ascend<P: Proxy>(
    start: &DesignPoint,
    models: &[P],
    space: &DesignSpace,
    cfg: &AscentConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if models.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    if start.len() != space.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.input_dim(),
            got: start.len(),
        });
    }
    if !start.is_finite() {
        return Err(Error::NonFinite("start design"));
    }
    let discrete = matches!(space, DesignSpace::Discrete { .. });
    let mut x = start.0.clone();
    let mut states = Vec::with_capacity(if cfg.record_trajectory { cfg.steps + 1 } else { 0 });
    let mut d_norms = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let eval = evaluate(&x, models, cfg).map_err(|e| match e {
            Error::NonFinite(_) => Error::AscentNaN { step },
            other => other,
        })?;
        let d_norm = l2(&eval.d);
        d_norms.push(d_norm);
        if cfg.record_trajectory {
            states.push(TrajectoryState {
                x: x.clone(),
                predictions: eval.predictions,
                d_norm,
            });
        }
        for (xi, di) in x.iter_mut().zip(&eval.d) {
            *xi += cfg.step_size * di;
        }
        if !discrete {
            if let Some(r) = cfg.clip_radius {
                let n = l2(&x);
                if n > r {
                    x.iter_mut().for_each(|v| *v *= r / n);
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::AscentNaN { step });
        }
        if discrete && cfg.harden_every_step {
            x = harden_discrete(&x, space)?.0;
        }
    }

    let last = evaluate(&x, models, cfg).map_err(|e| match e {
        Error::NonFinite(_) => Error::AscentNaN { step: cfg.steps },
        other => other,
    })?;
    let final_d_norm = l2(&last.d);
    if cfg.record_trajectory {
        states.push(TrajectoryState {
            x: x.clone(),
            predictions: last.predictions,
            d_norm: final_d_norm,
        });
    }
    let final_point = if discrete {
        harden_discrete(&x, space)?
    } else {
        DesignPoint(x.clone())
    };
    let final_design = space.decode(&final_point)?;
    Ok(Trajectory {
        states,
        d_norms,
        final_d_norm,
        final_relaxed: x,
        final_point,
        final_design,
    })
}

/// Independent ascents from every start, in order; may run in parallel.
pub fn ascend_batch<P: Proxy>(
    starts: &[DesignPoint],
    models: &[P],
    space: &DesignSpace,
    cfg: &AscentConfig,
) -> Result<Vec<Trajectory>> {
    if starts.is_empty() {
        return Err(Error::Empty("start designs"));
    }
    starts
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            ascend(s, models, space, cfg).map_err(|e| Error::Trajectory {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
