//! Continuous tasks with closed-form objectives.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::task_rng;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::space::{Design, DesignSpace};

pub const RIDGE_BETA: f64 = 5.0;
/// Standard deviation of the off-manifold coordinates in the ridge dataset.
pub const RIDGE_NOISE: f64 = 0.1;
const RIDGE_SIZE: usize = 20_000;
const BOWL_SIZE: usize = 10_000;

fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Saturating gain `10 t / (1 + |t|)`.
pub fn saturate(t: f64) -> f64 {
    10.0 * t / (1.0 + t.abs())
}

/// `f(x) = s(<u, x_par>) − β ‖x_perp‖²`, where `x_par` holds the first
/// `⌈dim/4⌉` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    dim: usize,
    u: Vec<f64>,
}

impl Ridge {
    pub fn generate(seed: u64, dim: usize) -> Result<Self> {
        if dim < 4 {
            return Err(Error::InvalidArgument(format!(
                "ridge dimension must be at least 4, got {dim}"
            )));
        }
        let k = dim.div_ceil(4);
        let mut rng = task_rng(seed, 2);
        Ok(Self {
            dim,
            u: random_unit(&mut rng, k),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of on-manifold coordinates.
    pub fn manifold_dim(&self) -> usize {
        self.u.len()
    }

    pub fn direction(&self) -> &[f64] {
        &self.u
    }

    pub fn space(&self) -> DesignSpace {
        DesignSpace::Continuous {
            dim: self.dim,
            mean: vec![0.0; self.dim],
            std: vec![1.0; self.dim],
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let k = self.u.len();
        let t: f64 = self.u.iter().zip(&x[..k]).map(|(a, b)| a * b).sum();
        let off: f64 = x[k..].iter().map(|v| v * v).sum();
        saturate(t) - RIDGE_BETA * off
    }

    pub fn sample_dataset(&self, seed: u64) -> Result<Dataset> {
        let mut rng = task_rng(seed, 3);
        let noise = Normal::new(0.0, RIDGE_NOISE).expect("valid normal");
        let k = self.u.len();
        let mut designs = Vec::with_capacity(RIDGE_SIZE);
        let mut ys = Vec::with_capacity(RIDGE_SIZE);
        for _ in 0..RIDGE_SIZE {
            let x: Vec<f64> = (0..self.dim)
                .map(|j| {
                    if j < k {
                        StandardNormal.sample(&mut rng)
                    } else {
                        noise.sample(&mut rng)
                    }
                })
                .collect();
            ys.push(self.score(&x));
            designs.push(Design::Real(x));
        }
        Dataset::new(self.space(), designs, ys)
    }
}

/// `f(x) = −‖x − x*‖²` with a seeded unit-norm `x*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bowl {
    center: Vec<f64>,
}

impl Bowl {
    pub fn generate(seed: u64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("bowl dimension must be positive".into()));
        }
        let mut rng = task_rng(seed, 4);
        Ok(Self {
            center: random_unit(&mut rng, dim),
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn space(&self) -> DesignSpace {
        let dim = self.center.len();
        DesignSpace::Continuous {
            dim,
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        -self
            .center
            .iter()
            .zip(x)
            .map(|(c, v)| (v - c) * (v - c))
            .sum::<f64>()
    }

    pub fn sample_dataset(&self, seed: u64) -> Result<Dataset> {
        let mut rng = task_rng(seed, 5);
        let dim = self.center.len();
        let mut designs = Vec::with_capacity(BOWL_SIZE);
        let mut ys = Vec::with_capacity(BOWL_SIZE);
        for _ in 0..BOWL_SIZE {
            let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            ys.push(self.score(&x));
            designs.push(Design::Real(x));
        }
        Dataset::new(self.space(), designs, ys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_examples() {
        let r = Ridge::generate(3, 8).unwrap();
        assert_eq!(r.manifold_dim(), 2);
        assert_eq!(r.score(&[0.0; 8]), 0.0);
        let mut x = vec![0.0; 8];
        x[..2].copy_from_slice(r.direction());
        assert!((r.score(&x) - 5.0).abs() < 1e-12);
        x[5] = 1.0;
        assert!((r.score(&x) - 0.0).abs() < 1e-12);
        assert!(Ridge::generate(0, 3).is_err());
    }

    #[test]
    fn bowl_examples() {
        let b = Bowl::generate(9, 4).unwrap();
        let norm: f64 = b.center().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(b.score(b.center()), 0.0);
        assert!(b.score(&[0.0; 4]) < 0.0);
    }
}
