//! Reference solvers for the primal MGDA and CAGrad programs, working
//! directly over the update direction `d`.
//!
//! Both programs are rewritten in epigraph form over `(d, t)` with the
//! constraints `<g_i, d> - t > 0` and solved by a log-barrier interior-point
//! method with damped Newton steps. The barrier weight shrinks until the
//! duality-gap bound `(#constraints) * mu` is negligible. These solvers exist
//! to cross-check the dual solvers on small problems.

use nalgebra::{DMatrix, DVector};

use super::{dot, improvement_rate, norm, CagradConfig, CombinedGradient, GradientSet};
use crate::error::{Error, Result};

/// Largest design dimension accepted by the reference solvers.
pub const PRIMAL_MAX_DIM: usize = 16;

const MU_START: f64 = 1.0;
const MU_FACTOR: f64 = 0.1;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub combined: CombinedGradient,
    /// Achieved primal objective at `d`.
    pub objective: f64,
    /// `min_i <g_i, d>` at `d`.
    pub min_rate: f64,
}

/// One barrier subproblem: value, gradient and Hessian of the concave
/// barrier objective, or `None` outside the strict interior.
trait Barrier {
    fn eval(&self, z: &DVector<f64>, mu: f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)>;
    fn value(&self, z: &DVector<f64>, mu: f64) -> Option<f64>;
    fn constraint_count(&self) -> usize;
}

/// Unit-scale gradients as rows, plus their count and dimension.
struct Problem {
    rows: Vec<DVector<f64>>,
    n: usize,
}

impl Problem {
    fn slacks(&self, z: &DVector<f64>) -> Option<Vec<f64>> {
        let d = z.rows(0, self.n);
        let t = z[self.n];
        let s: Vec<f64> = self.rows.iter().map(|g| g.dot(&d) - t).collect();
        s.iter().all(|&v| v > 0.0).then_some(s)
    }

    /// Adds the value/gradient/Hessian of `mu * sum log(<g_i, d> - t)`.
    fn add_rate_barrier(
        &self,
        s: &[f64],
        mu: f64,
        grad: &mut DVector<f64>,
        hess: &mut DMatrix<f64>,
    ) -> f64 {
        let n = self.n;
        let mut val = 0.0;
        for (g, &si) in self.rows.iter().zip(s) {
            val += mu * si.ln();
            let inv = 1.0 / si;
            let inv2 = inv * inv;
            // a_i = (g_i, -1); grad += mu a_i / s_i; hess -= mu a_i a_iᵀ / s_i²
            for r in 0..n {
                grad[r] += mu * g[r] * inv;
                for c in 0..n {
                    hess[(r, c)] -= mu * g[r] * g[c] * inv2;
                }
                hess[(r, n)] += mu * g[r] * inv2;
                hess[(n, r)] += mu * g[r] * inv2;
            }
            grad[n] -= mu * inv;
            hess[(n, n)] -= mu * inv2;
        }
        val
    }
}

struct MgdaBarrier(Problem);

impl Barrier for MgdaBarrier {
    fn eval(&self, z: &DVector<f64>, mu: f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let p = &self.0;
        let s = p.slacks(z)?;
        let n = p.n;
        let mut grad = DVector::zeros(n + 1);
        let mut hess = DMatrix::zeros(n + 1, n + 1);
        let d = z.rows(0, n);
        let mut val = z[n] - 0.5 * d.norm_squared();
        for r in 0..n {
            grad[r] = -d[r];
            hess[(r, r)] = -1.0;
        }
        grad[n] = 1.0;
        val += p.add_rate_barrier(&s, mu, &mut grad, &mut hess);
        Some((val, grad, hess))
    }

    fn value(&self, z: &DVector<f64>, mu: f64) -> Option<f64> {
        let p = &self.0;
        let s = p.slacks(z)?;
        let d = z.rows(0, p.n);
        Some(z[p.n] - 0.5 * d.norm_squared() + mu * s.iter().map(|v| v.ln()).sum::<f64>())
    }

    fn constraint_count(&self) -> usize {
        self.0.rows.len()
    }
}

struct CagradBarrier {
    p: Problem,
    center: DVector<f64>,
    radius_sq: f64,
}

impl CagradBarrier {
    fn ball_slack(&self, z: &DVector<f64>) -> Option<f64> {
        let d = z.rows(0, self.p.n);
        let q = self.radius_sq - (d - &self.center).norm_squared();
        (q > 0.0).then_some(q)
    }
}

impl Barrier for CagradBarrier {
    fn eval(&self, z: &DVector<f64>, mu: f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.p.n;
        let s = self.p.slacks(z)?;
        let q = self.ball_slack(z)?;
        let mut grad = DVector::zeros(n + 1);
        let mut hess = DMatrix::zeros(n + 1, n + 1);
        let mut val = z[n];
        grad[n] = 1.0;
        val += self.p.add_rate_barrier(&s, mu, &mut grad, &mut hess);
        // mu log(r² - ‖d - g0‖²)
        val += mu * q.ln();
        let u: Vec<f64> = (0..n).map(|r| z[r] - self.center[r]).collect();
        for r in 0..n {
            grad[r] -= 2.0 * mu * u[r] / q;
            hess[(r, r)] -= 2.0 * mu / q;
            for c in 0..n {
                hess[(r, c)] -= 4.0 * mu * u[r] * u[c] / (q * q);
            }
        }
        Some((val, grad, hess))
    }

    fn value(&self, z: &DVector<f64>, mu: f64) -> Option<f64> {
        let s = self.p.slacks(z)?;
        let q = self.ball_slack(z)?;
        Some(z[self.p.n] + mu * (s.iter().map(|v| v.ln()).sum::<f64>() + q.ln()))
    }

    fn constraint_count(&self) -> usize {
        self.p.rows.len() + 1
    }
}

/// Path-following barrier method; returns the final interior point.
fn follow_path<B: Barrier>(b: &B, mut z: DVector<f64>, gap_tol: f64) -> Result<DVector<f64>> {
    let mut mu = MU_START;
    let mut total = 0;
    loop {
        let mut centered = false;
        for _ in 0..MAX_NEWTON {
            total += 1;
            let (val, grad, hess) = b
                .eval(&z, mu)
                .ok_or(Error::NonFinite("barrier iterate left the interior"))?;
            let neg = -hess;
            let chol = neg.cholesky().ok_or(Error::NotConverged {
                iterations: total,
                residual: f64::NAN,
                best: z.iter().copied().collect(),
            })?;
            let step = chol.solve(&grad);
            let decrement = grad.dot(&step);
            if decrement / 2.0 <= 1e-14 * (1.0 + val.abs()) {
                centered = true;
                break;
            }
            let mut alpha = 1.0;
            loop {
                let trial = &z + alpha * &step;
                if let Some(v) = b.value(&trial, mu) {
                    if v >= val + 0.25 * alpha * decrement {
                        z = trial;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    centered = true;
                    break;
                }
            }
            if alpha < 1e-16 {
                break;
            }
        }
        if !centered {
            return Err(Error::NotConverged {
                iterations: total,
                residual: mu,
                best: z.iter().copied().collect(),
            });
        }
        if b.constraint_count() as f64 * mu < gap_tol {
            return Ok(z);
        }
        mu *= MU_FACTOR;
    }
}

fn problem(gs: &GradientSet, scale: f64) -> Result<Problem> {
    let n = gs.dim();
    if n > PRIMAL_MAX_DIM {
        return Err(Error::TooLarge {
            dim: n,
            max: PRIMAL_MAX_DIM,
        });
    }
    Ok(Problem {
        rows: gs
            .grads()
            .iter()
            .map(|g| DVector::from_iterator(n, g.iter().map(|v| v / scale)))
            .collect(),
        n,
    })
}

/// Solves `max_d min_i <d, g_i> - ½‖d‖²` directly over `d`.
///
/// `tol` bounds the duality gap of the final barrier subproblem in units of
/// the largest squared gradient norm.
pub fn solve_mgda_primal_reference(gs: &GradientSet, tol: f64) -> Result<PrimalSolution> {
    let scale = gs.max_norm();
    let p = problem(gs, scale.max(f64::MIN_POSITIVE))?;
    let n = p.n;
    if scale == 0.0 {
        return Ok(PrimalSolution {
            combined: CombinedGradient::plain(vec![0.0; n]),
            objective: 0.0,
            min_rate: 0.0,
        });
    }
    let mut z0 = DVector::zeros(n + 1);
    z0[n] = -1.0;
    let z = follow_path(&MgdaBarrier(p), z0, tol)?;
    let d: Vec<f64> = (0..n).map(|r| z[r] * scale).collect();
    let min_rate = improvement_rate(gs, &d)?;
    Ok(PrimalSolution {
        objective: min_rate - 0.5 * dot(&d, &d),
        min_rate,
        combined: CombinedGradient::plain(d),
    })
}

/// Solves `max_d min_i <d, g_i>` subject to `‖d - g₀‖ <= c‖g₀‖` directly.
pub fn solve_cagrad_primal_reference(
    gs: &GradientSet,
    cfg: CagradConfig,
    tol: f64,
) -> Result<PrimalSolution> {
    let scale = gs.max_norm();
    let p = problem(gs, scale.max(f64::MIN_POSITIVE))?;
    let n = p.n;
    let g0 = gs.mean();
    let radius = cfg.c * norm(g0);
    if radius == 0.0 {
        let d = g0.to_vec();
        let min_rate = improvement_rate(gs, &d)?;
        return Ok(PrimalSolution {
            combined: CombinedGradient::plain(d),
            objective: min_rate,
            min_rate,
        });
    }
    let center = DVector::from_iterator(n, g0.iter().map(|v| v / scale));
    let mut z0 = DVector::zeros(n + 1);
    let start_rate = p
        .rows
        .iter()
        .map(|g| g.dot(&center))
        .fold(f64::INFINITY, f64::min);
    z0.rows_mut(0, n).copy_from(&center);
    z0[n] = start_rate - 1.0;
    let r = radius / scale;
    let barrier = CagradBarrier {
        p,
        center,
        radius_sq: r * r,
    };
    let z = follow_path(&barrier, z0, tol)?;
    let d: Vec<f64> = (0..n).map(|i| z[i] * scale).collect();
    let min_rate = improvement_rate(gs, &d)?;
    Ok(PrimalSolution {
        objective: min_rate,
        min_rate,
        combined: CombinedGradient::plain(d),
    })
}
