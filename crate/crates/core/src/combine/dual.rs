//! Dual solvers for MGDA and CAGrad: convex programs over the simplex with
//! one variable per ensemble member.
//!
//! Both duals are invariant to a common positive rescaling of the gradients,
//! so each solve works on gradients divided by their largest norm and scales
//! the resulting direction back.

use super::simplex::{minimize_on_simplex, SolverOptions};
use super::{norm, CagradConfig, CagradInternals, CombinedGradient, GradientSet, SimplexWeights};
use crate::error::Result;
use nalgebra::{DMatrix, DVector};

/// Smoothing added under the norm in the CAGrad dual objective.
const CAGRAD_NORM_SMOOTHING: f64 = 1e-12;

fn quad(gram: &[Vec<f64>], w: &[f64]) -> (f64, Vec<f64>) {
    let gw: Vec<f64> = gram
        .iter()
        .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum())
        .collect();
    let v = w.iter().zip(&gw).map(|(a, b)| a * b).sum::<f64>();
    (v, gw)
}

fn finish_weights(w: Vec<f64>) -> SimplexWeights {
    let w: Vec<f64> = w.into_iter().map(|v| if v < 1e-12 { v.max(0.0) } else { v }).collect();
    let s: f64 = w.iter().sum();
    SimplexWeights::new(w.into_iter().map(|v| v / s).collect()).expect("projection output is on the simplex")
}

/// Exact minimizer of `½ wᵀGw` over the simplex restricted to `support`,
/// from the KKT system `[G_S 1; 1ᵀ 0] [w; ν] = [0; 1]`.
fn solve_on_support(gram: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let mut a = DMatrix::zeros(k + 1, k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = gram[i][j];
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
    }
    let mut b = DVector::zeros(k + 1);
    b[k] = 1.0;
    let x = a.clone().svd(true, true).solve(&b, 1e-13).ok()?;
    if (&a * &x - &b).amax() > 1e-10 {
        return None;
    }
    let mut w = vec![0.0; gram.len()];
    for (r, &i) in support.iter().enumerate() {
        w[i] = x[r];
    }
    Some(w)
}

/// Active-set refinement of an approximate minimizer of `½ wᵀGw` on the
/// simplex. Returns `None` when no exact optimum is found near `w`.
fn polish_min_norm(gram: &[Vec<f64>], w: &[f64]) -> Option<Vec<f64>> {
    const SLACK: f64 = 1e-13;
    let m = w.len();
    let mut support: Vec<usize> = (0..m).filter(|&i| w[i] > 1e-9).collect();
    for _ in 0..2 * m + 2 {
        if support.is_empty() {
            return None;
        }
        let cand = solve_on_support(gram, &support)?;
        let (neg_at, neg) = support
            .iter()
            .map(|&i| (i, cand[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty support");
        if neg < 0.0 {
            support.retain(|&i| i != neg_at);
            continue;
        }
        let (v, gw) = quad(gram, &cand);
        let worst = (0..m)
            .filter(|i| !support.contains(i))
            .map(|i| (i, gw[i] - v))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            Some((i, gap)) if gap < -SLACK => {
                support.push(i);
                support.sort_unstable();
            }
            _ => return Some(cand),
        }
    }
    None
}

/// Minimum-norm point of the convex hull of the gradients.
///
/// Minimizes `½‖Σ w_i g_i‖²` over the simplex; the direction is `d = g_w*`.
pub fn solve_mgda_dual(gs: &GradientSet, opts: &SolverOptions) -> Result<CombinedGradient> {
    let m = gs.num_models();
    let scale = gs.max_norm();
    if scale == 0.0 {
        return Ok(CombinedGradient {
            d: vec![0.0; gs.dim()],
            weights: Some(SimplexWeights::uniform(m)),
            cagrad: None,
        });
    }
    let unit = gs.scaled(1.0 / scale);
    let gram = unit.gram();
    let objective = |w: &[f64]| {
        let (v, grad) = quad(&gram, w);
        (0.5 * v, grad)
    };
    let sol = minimize_on_simplex(objective, &vec![1.0 / m as f64; m], opts)?;
    let w = match polish_min_norm(&gram, &sol.w) {
        Some(p) if quad(&gram, &p).0 <= quad(&gram, &sol.w).0 + 1e-15 => p,
        _ => sol.w,
    };
    let weights = finish_weights(w);
    let d = gs.weighted(weights.as_slice());
    Ok(CombinedGradient {
        d,
        weights: Some(weights),
        cagrad: None,
    })
}

/// CAGrad direction via its dual `min_w g_wᵀg₀ + √φ ‖g_w‖`, `φ = c²‖g₀‖²`.
///
/// The direction is `d = g₀ + g_w* / λ*` with `λ* = ‖g_w*‖ / √φ`, which lies
/// on the boundary of the ball `‖d − g₀‖ ≤ c‖g₀‖`. When `c = 0` or `g₀ = 0`
/// the ball collapses and `d = g₀`; when `g_w* = 0` the direction is `g₀`.
pub fn solve_cagrad_dual(
    gs: &GradientSet,
    cfg: CagradConfig,
    opts: &SolverOptions,
) -> Result<CombinedGradient> {
    let m = gs.num_models();
    let g0 = gs.mean().to_vec();
    let g0_norm = norm(&g0);
    let phi = cfg.c * cfg.c * g0_norm * g0_norm;
    if cfg.c == 0.0 || g0_norm == 0.0 {
        return Ok(CombinedGradient {
            d: g0,
            weights: None,
            cagrad: Some(CagradInternals {
                phi,
                lambda_star: None,
            }),
        });
    }

    let scale = gs.max_norm();
    let unit = gs.scaled(1.0 / scale);
    let gram = unit.gram();
    // b_i = <g_i, g0> in unit scale
    let b: Vec<f64> = gram
        .iter()
        .map(|row| row.iter().sum::<f64>() / m as f64)
        .collect();
    let sqrt_phi = cfg.c * norm(unit.mean());
    let objective = |w: &[f64]| {
        let (q, gw) = quad(&gram, w);
        let r = (q.max(0.0) + CAGRAD_NORM_SMOOTHING).sqrt();
        let lin = b.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
        let grad = b
            .iter()
            .zip(&gw)
            .map(|(bi, gi)| bi + sqrt_phi * gi / r)
            .collect();
        (lin + sqrt_phi * r, grad)
    };
    let sol = minimize_on_simplex(objective, &vec![1.0 / m as f64; m], opts)?;
    let weights = finish_weights(sol.w);
    let gw = gs.weighted(weights.as_slice());
    let gw_norm = norm(&gw);
    let (d, lambda_star) = if gw_norm == 0.0 {
        (g0, None)
    } else {
        let lambda = gw_norm / phi.sqrt();
        let d = g0.iter().zip(&gw).map(|(a, b)| a + b / lambda).collect();
        (d, Some(lambda))
    };
    Ok(CombinedGradient {
        d,
        weights: Some(weights),
        cagrad: Some(CagradInternals { phi, lambda_star }),
    })
}
