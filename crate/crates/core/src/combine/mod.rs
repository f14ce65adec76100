//! Combining per-model gradients into one update direction.
//!
//! Five strategies are available: the first model's gradient alone, the mean,
//! the gradient of the currently lowest-scoring model, MGDA (minimum-norm
//! point of the gradients' convex hull) and CAGrad (best worst-case
//! improvement inside a ball around the mean gradient). MGDA and CAGrad are
//! solved through their simplex-constrained duals; `primal` holds
//! low-dimensional reference solvers used to cross-check them.

mod dual;
mod primal;
mod simplex;

use serde::{Deserialize, Serialize};

pub use dual::{solve_cagrad_dual, solve_mgda_dual};
pub use primal::{solve_cagrad_primal_reference, solve_mgda_primal_reference, PrimalSolution, PRIMAL_MAX_DIM};
pub use simplex::{minimize_on_simplex, project_onto_simplex, SimplexSolution, SolverOptions};

use crate::error::{Error, Result};

/// Per-model gradients at one design, with their mean and optional values.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    grads: Vec<Vec<f64>>,
    values: Option<Vec<f64>>,
    mean: Vec<f64>,
}

impl GradientSet {
    pub fn new(grads: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = grads.first() else {
            return Err(Error::Empty("gradient set"));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::Empty("gradient vector"));
        }
        for g in &grads {
            if g.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("gradient"));
            }
        }
        let m = grads.len() as f64;
        let mut mean = vec![0.0; n];
        for g in &grads {
            for (a, b) in mean.iter_mut().zip(g) {
                *a += b;
            }
        }
        mean.iter_mut().for_each(|a| *a /= m);
        Ok(Self {
            grads,
            values: None,
            mean,
        })
    }

    /// Attaches model predictions, one per gradient.
    pub fn with_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.grads.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grads.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model values"));
        }
        self.values = Some(values);
        Ok(self)
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    /// The mean gradient g₀.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn num_models(&self) -> usize {
        self.grads.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Largest gradient norm; zero iff every gradient is zero.
    pub fn max_norm(&self) -> f64 {
        self.grads.iter().map(|g| norm(g)).fold(0.0, f64::max)
    }

    /// Each gradient rescaled to unit norm (zero gradients stay zero).
    pub fn normalized(&self) -> Self {
        let grads = self
            .grads
            .iter()
            .map(|g| {
                let n = norm(g);
                if n > 0.0 {
                    g.iter().map(|v| v / n).collect()
                } else {
                    g.clone()
                }
            })
            .collect();
        let mut gs = Self::new(grads).expect("rescaling keeps gradients valid");
        gs.values = self.values.clone();
        gs
    }

    /// `sum_i w_i g_i`.
    pub fn weighted(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (g, &wi) in self.grads.iter().zip(w) {
            for (o, v) in out.iter_mut().zip(g) {
                *o += wi * v;
            }
        }
        out
    }

    pub(crate) fn gram(&self) -> Vec<Vec<f64>> {
        let m = self.num_models();
        let mut gram = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let v = dot(&self.grads[i], &self.grads[j]);
                gram[i][j] = v;
                gram[j][i] = v;
            }
        }
        gram
    }

    pub(crate) fn scaled(&self, s: f64) -> Self {
        let grads = self
            .grads
            .iter()
            .map(|g| g.iter().map(|v| v * s).collect())
            .collect();
        let mut gs = Self::new(grads).expect("scaling keeps gradients valid");
        gs.values = self.values.clone();
        gs
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Clamps entries above `-1e-12` to be nonnegative and checks the sum.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&v| !v.is_finite() || v < -1e-12) {
            return Err(Error::InvalidArgument("simplex weights must be nonnegative".into()));
        }
        let w: Vec<f64> = w.into_iter().map(|v| v.max(0.0)).collect();
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "simplex weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CagradInternals {
    /// `c² ‖g₀‖²`.
    pub phi: f64,
    /// `‖g_w*‖ / √φ`; `None` when φ = 0 or `g_w* = 0`.
    pub lambda_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedGradient {
    pub d: Vec<f64>,
    pub weights: Option<SimplexWeights>,
    pub cagrad: Option<CagradInternals>,
}

impl CombinedGradient {
    pub fn plain(d: Vec<f64>) -> Self {
        Self {
            d,
            weights: None,
            cagrad: None,
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CagradConfig {
    pub c: f64,
}

impl CagradConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::InvalidArgument(format!(
                "CAGrad c must lie in [0, 1), got {c}"
            )));
        }
        Ok(Self { c })
    }
}

/// Which rule turns the ensemble's gradients into one update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combiner {
    SingleModel,
    Mean,
    Min,
    Mgda,
    Cagrad,
}

impl Combiner {
    pub const ALL: [Combiner; 5] = [
        Combiner::SingleModel,
        Combiner::Mean,
        Combiner::Min,
        Combiner::Mgda,
        Combiner::Cagrad,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Combiner::SingleModel => "single model",
            Combiner::Mean => "ensemble, mean",
            Combiner::Min => "ensemble, min",
            Combiner::Mgda => "ensemble, MGDA",
            Combiner::Cagrad => "ensemble, CAGrad",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Combiner::SingleModel => "single-model",
            Combiner::Mean => "mean",
            Combiner::Min => "min",
            Combiner::Mgda => "mgda",
            Combiner::Cagrad => "cagrad",
        }
    }

    /// Whether only the first ensemble member is consulted.
    pub fn uses_single_model(self) -> bool {
        self == Combiner::SingleModel
    }
}

impl std::str::FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Combiner::ALL
            .into_iter()
            .find(|c| c.key() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown combiner `{s}`")))
    }
}

impl std::fmt::Display for Combiner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

pub fn combine_mean(gs: &GradientSet) -> CombinedGradient {
    CombinedGradient::plain(gs.mean().to_vec())
}

/// Gradient of the lowest-valued model; ties go to the lowest index.
pub fn combine_min(gs: &GradientSet) -> Result<CombinedGradient> {
    let values = gs
        .values()
        .ok_or_else(|| Error::InvalidArgument("min combiner needs model values".into()))?;
    let mut j = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[j] {
            j = i;
        }
    }
    Ok(CombinedGradient::plain(gs.grads()[j].clone()))
}

/// Applies `combiner` to `gs`.
pub fn combine(
    combiner: Combiner,
    gs: &GradientSet,
    cagrad: CagradConfig,
    opts: &SolverOptions,
) -> Result<CombinedGradient> {
    match combiner {
        Combiner::SingleModel => Ok(CombinedGradient::plain(gs.grads()[0].clone())),
        Combiner::Mean => Ok(combine_mean(gs)),
        Combiner::Min => combine_min(gs),
        Combiner::Mgda => solve_mgda_dual(gs, opts),
        Combiner::Cagrad => solve_cagrad_dual(gs, cagrad, opts),
    }
}

/// First-order worst-case improvement `min_i <g_i, d>`.
pub fn improvement_rate(gs: &GradientSet, d: &[f64]) -> Result<f64> {
    if d.len() != gs.dim() {
        return Err(Error::DimensionMismatch {
            expected: gs.dim(),
            got: d.len(),
        });
    }
    Ok(gs
        .grads()
        .iter()
        .map(|g| dot(g, d))
        .fold(f64::INFINITY, f64::min))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gs(grads: &[&[f64]]) -> GradientSet {
        GradientSet::new(grads.iter().map(|g| g.to_vec()).collect()).unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(combine_mean(&gs(&[&[1.0, 0.0], &[0.0, 1.0]])).d, vec![0.5, 0.5]);
        assert_eq!(combine_mean(&gs(&[&[3.0, -2.0]])).d, vec![3.0, -2.0]);
        assert_eq!(combine_mean(&gs(&[&[1.0, 2.0], &[-1.0, -2.0]])).d, vec![0.0, 0.0]);
    }

    #[test]
    fn min_examples() {
        let g = gs(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let with = |v: Vec<f64>| g.clone().with_values(v).unwrap();
        assert_eq!(combine_min(&with(vec![3.0, 5.0])).unwrap().d, vec![1.0, 0.0]);
        assert_eq!(combine_min(&with(vec![5.0, 3.0])).unwrap().d, vec![0.0, 1.0]);
        assert_eq!(combine_min(&with(vec![4.0, 4.0])).unwrap().d, vec![1.0, 0.0]);
        let single = gs(&[&[2.0, 7.0]]).with_values(vec![0.0]).unwrap();
        assert_eq!(combine_min(&single).unwrap().d, vec![2.0, 7.0]);
        assert!(combine_min(&g).is_err());
    }

    #[test]
    fn improvement_rate_examples() {
        let g = gs(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(improvement_rate(&g, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(improvement_rate(&g, &[1.0, 1.0]).unwrap(), 1.0);
        assert!(improvement_rate(&g, &[1.0]).is_err());
    }

    #[test]
    fn gradient_set_validation() {
        assert!(GradientSet::new(vec![]).is_err());
        assert!(GradientSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(GradientSet::new(vec![vec![f64::NAN]]).is_err());
        assert!(gs(&[&[1.0]]).with_values(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn simplex_weights_clamp() {
        let w = SimplexWeights::new(vec![-1e-13, 1.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 1.0]);
        assert!(SimplexWeights::new(vec![-1e-3, 1.001]).is_err());
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn cagrad_c_range() {
        assert!(CagradConfig::new(0.0).is_ok());
        assert!(CagradConfig::new(0.99).is_ok());
        assert!(CagradConfig::new(1.0).is_err());
        assert!(CagradConfig::new(-0.1).is_err());
    }

    #[test]
    fn combiner_keys_round_trip() {
        for c in Combiner::ALL {
            assert_eq!(c.key().parse::<Combiner>().unwrap(), c);
        }
        assert!("sum".parse::<Combiner>().is_err());
    }

    #[test]
    fn all_zero_gradients_give_zero_direction() {
        let g = gs(&[&[0.0, 0.0], &[0.0, 0.0]]).with_values(vec![1.0, 2.0]).unwrap();
        let opts = SolverOptions::default();
        for c in Combiner::ALL {
            let d = combine(c, &g, CagradConfig::new(0.5).unwrap(), &opts).unwrap();
            assert_eq!(d.d, vec![0.0, 0.0], "{c}");
        }
    }
}
