//! Score metrics: normalization, summary statistics and rank correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps `y` onto the unit scale of the total dataset's score range.
///
/// Values above 1 mean the design beats every entry of the total dataset.
pub fn normalize_score(y: f64, y_min: f64, y_max: f64) -> Result<f64> {
    if !(y.is_finite() && y_min.is_finite() && y_max.is_finite()) {
        return Err(Error::NonFinite("score"));
    }
    if y_max <= y_min {
        return Err(Error::DegenerateRange { y_min, y_max });
    }
    Ok((y - y_min) / (y_max - y_min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub max: f64,
    pub p50: f64,
    pub mean: f64,
}

/// Max, median and mean of a set of scores, raw and optionally normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub raw: ScoreTriple,
    pub normalized: Option<ScoreTriple>,
}

impl ScoreSummary {
    pub fn max(&self) -> f64 {
        self.raw.max
    }

    pub fn p50(&self) -> f64 {
        self.raw.p50
    }

    pub fn mean(&self) -> f64 {
        self.raw.mean
    }

    /// Adds normalized values against the total-dataset range.
    pub fn with_range(mut self, y_min: f64, y_max: f64) -> Result<Self> {
        self.normalized = Some(ScoreTriple {
            max: normalize_score(self.raw.max, y_min, y_max)?,
            p50: normalize_score(self.raw.p50, y_min, y_max)?,
            mean: normalize_score(self.raw.mean, y_min, y_max)?,
        });
        Ok(self)
    }
}

/// Nearest-rank percentile: the `ceil(q * n)`-th smallest value (1-based).
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn summarize_scores(ys: &[f64]) -> Result<ScoreSummary> {
    if ys.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("score list"));
    }
    let mut sorted = ys.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    Ok(ScoreSummary {
        raw: ScoreTriple {
            max: sorted[sorted.len() - 1],
            p50: nearest_rank(&sorted, 0.5),
            // summation error can push the mean a hair outside [min, max]
            mean: mean.clamp(sorted[0], sorted[sorted.len() - 1]),
        },
        normalized: None,
    })
}

/// Fractional ranks (1-based), ties share their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "spearman needs at least two pairs".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input"));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}
