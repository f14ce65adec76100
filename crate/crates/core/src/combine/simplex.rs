//! Euclidean projection onto the probability simplex and projected gradient
//! descent over it.

use crate::error::{Error, Result};

/// Sort-based Euclidean projection of `v` onto `{w : w >= 0, sum w = 1}`.
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Gradient-mapping norm below which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub w: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Minimizes a convex function over the simplex by accelerated projected
/// gradient descent with backtracking and adaptive restart.
///
/// `f` returns the value and gradient at a point. Convergence is declared
/// when the gradient mapping `(y - P(y - t grad)) / t` at the current
/// extrapolation point has norm below `opts.tol`.
pub fn minimize_on_simplex<F>(f: F, start: &[f64], opts: &SolverOptions) -> Result<SimplexSolution>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut w = project_onto_simplex(start);
    let mut y = w.clone();
    let mut momentum = 1.0f64;
    let mut step = 1.0;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let (fy, grad) = f(&y);
        let (w_new, f_new, diff_sq) = loop {
            let trial: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - step * gi).collect();
            let w_new = project_onto_simplex(&trial);
            let (mut lin, mut diff_sq) = (0.0, 0.0);
            for ((a, b), g) in w_new.iter().zip(&y).zip(&grad) {
                lin += g * (a - b);
                diff_sq += (a - b) * (a - b);
            }
            let (f_new, _) = f(&w_new);
            let bound = fy + lin + diff_sq / (2.0 * step);
            if f_new <= bound + 1e-15 * fy.abs().max(1.0) || step < 1e-20 {
                break (w_new, f_new, diff_sq);
            }
            step *= 0.5;
        };
        residual = diff_sq.sqrt() / step;
        if !residual.is_finite() || !f_new.is_finite() {
            break;
        }
        if residual < opts.tol {
            return Ok(SimplexSolution {
                w: w_new,
                value: f_new,
                iterations: it,
                residual,
            });
        }
        // restart when the momentum direction opposes the gradient step
        let opposing: f64 = y
            .iter()
            .zip(&w_new)
            .zip(&w)
            .map(|((yi, ni), wi)| (yi - ni) * (ni - wi))
            .sum();
        if opposing > 0.0 {
            momentum = 1.0;
            y = w_new.clone();
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            y = w_new
                .iter()
                .zip(&w)
                .map(|(ni, wi)| ni + beta * (ni - wi))
                .collect();
            momentum = next;
        }
        w = w_new;
        step *= 1.5;
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual,
        best: w,
    })
}
