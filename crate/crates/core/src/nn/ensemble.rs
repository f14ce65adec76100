use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::MlpModel;
use super::train::{holdout_split, train_split, TrainConfig, ValMetrics};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::space::DesignSpace;

/// `m` proxies sharing one architecture, each with its own validation fold.
#[derive(Debug, Clone)]
pub struct Ensemble {
    space: DesignSpace,
    models: Vec<MlpModel>,
    metrics: Vec<ValMetrics>,
    /// Validation indices (into the training dataset) of each member.
    folds: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifest {
    space: DesignSpace,
    metrics: Vec<ValMetrics>,
    folds: Vec<Vec<usize>>,
}

impl Ensemble {
    pub fn new(
        space: DesignSpace,
        models: Vec<MlpModel>,
        metrics: Vec<ValMetrics>,
        folds: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let Some(first) = models.first() else {
            return Err(Error::Empty("ensemble"));
        };
        let shape = first.shape();
        if first.input_dim() != space.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.input_dim(),
                got: first.input_dim(),
            });
        }
        if models.iter().any(|m| m.shape() != shape) {
            return Err(Error::InvalidArgument(
                "ensemble members must share one architecture".into(),
            ));
        }
        if metrics.len() != models.len() || folds.len() != models.len() {
            return Err(Error::InvalidArgument(
                "one metric record and fold per member required".into(),
            ));
        }
        Ok(Self {
            space,
            models,
            metrics,
            folds,
        })
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn models(&self) -> &[MlpModel] {
        &self.models
    }

    pub fn metrics(&self) -> &[ValMetrics] {
        &self.metrics
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Writes `ensemble.json` plus one `model_<i>.bin` per member into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = EnsembleManifest {
            space: self.space.clone(),
            metrics: self.metrics.clone(),
            folds: self.folds.clone(),
        };
        fs::write(
            dir.join("ensemble.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        for (i, m) in self.models.iter().enumerate() {
            m.save(&dir.join(format!("model_{i}.bin")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: EnsembleManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("ensemble.json"))?)?;
        let models = (0..manifest.metrics.len())
            .map(|i| MlpModel::load(&dir.join(format!("model_{i}.bin"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(manifest.space, models, manifest.metrics, manifest.folds)
    }
}

/// Seeded partition of `0..n` into `m` disjoint folds covering every index.
///
/// The first `n % m` folds receive one extra sample.
pub fn fold_partition(n: usize, m: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    if n / m < 1 {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot fill {m} folds"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / m, n % m);
    let mut folds = Vec::with_capacity(m);
    let mut start = 0;
    for i in 0..m {
        let len = base + usize::from(i < extra);
        let mut f = idx[start..start + len].to_vec();
        f.sort_unstable();
        folds.push(f);
        start += len;
    }
    Ok(folds)
}

/// Trains `m` members; member `i` validates on fold `i`, trains on the rest,
/// and uses seed `cfg.seed + i`. A single member uses a 90/10 holdout split.
pub fn train_ensemble(data: &Dataset, m: usize, cfg: &TrainConfig) -> Result<Ensemble> {
    let splits: Vec<(Vec<usize>, Vec<usize>)> = if m == 1 {
        vec![holdout_split(data.len(), cfg.seed)?]
    } else {
        let folds = fold_partition(data.len(), m, cfg.seed)?;
        folds
            .iter()
            .enumerate()
            .map(|(i, val)| {
                let train: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .flat_map(|(_, f)| f.iter().copied())
                    .collect();
                let mut train = train;
                train.sort_unstable();
                (train, val.clone())
            })
            .collect()
    };
    let trained = splits
        .par_iter()
        .enumerate()
        .map(|(i, (tr, va))| {
            let member_cfg = TrainConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            train_split(&data.subset(tr), &data.subset(va), &member_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let folds = splits.into_iter().map(|(_, v)| v).collect();
    let metrics = trained.iter().map(|t| t.val).collect();
    let models = trained.into_iter().map(|t| t.model).collect();
    Ensemble::new(data.space().clone(), models, metrics, folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Design;
    use rand::Rng;

    fn data(n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let space = DesignSpace::continuous(2).unwrap();
        let designs: Vec<Design> = (0..n)
            .map(|_| Design::Real(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect();
        let ys = designs
            .iter()
            .map(|d| match d {
                Design::Real(x) => x[0] * x[1] + x[0],
                _ => unreachable!(),
            })
            .collect();
        Dataset::new(space, designs, ys).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            hidden: vec![8],
            epochs: 3,
            batch_size: 16,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn folds_disjoint_and_covering() {
        let folds = fold_partition(603, 6, 1).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..603).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![101, 101, 101, 100, 100, 100]);
        assert!(fold_partition(5, 6, 1).is_err());
        assert!(fold_partition(5, 0, 1).is_err());
    }

    #[test]
    fn six_members_on_600_points() {
        let ens = train_ensemble(&data(600), 6, &small_cfg()).unwrap();
        assert_eq!(ens.len(), 6);
        for f in ens.folds() {
            assert_eq!(f.len(), 100);
        }
    }

    #[test]
    fn single_member_uses_holdout() {
        let ens = train_ensemble(&data(200), 1, &small_cfg()).unwrap();
        assert_eq!(ens.len(), 1);
        assert_eq!(ens.folds()[0].len(), 20);
    }

    #[test]
    fn same_seed_same_weights() {
        let d = data(300);
        let a = train_ensemble(&d, 3, &small_cfg()).unwrap();
        let b = train_ensemble(&d, 3, &small_cfg()).unwrap();
        for (x, y) in a.models().iter().zip(b.models()) {
            assert_eq!(x.to_bytes(), y.to_bytes());
        }
    }

    #[test]
    fn save_load_round_trip() {
        let ens = train_ensemble(&data(200), 2, &small_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ens.save(dir.path()).unwrap();
        let back = Ensemble::load(dir.path()).unwrap();
        assert_eq!(back.models(), ens.models());
        assert_eq!(back.folds(), ens.folds());
        assert_eq!(back.space(), ens.space());
    }
}
