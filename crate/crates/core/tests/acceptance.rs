//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ensemble_mbo::ascent::{ascend, AscentConfig};
use ensemble_mbo::combine::{
    improvement_rate, solve_cagrad_dual, solve_cagrad_primal_reference, solve_mgda_dual,
    solve_mgda_primal_reference, CagradConfig, Combiner, GradientSet, SolverOptions,
};
use ensemble_mbo::harness::{run_experiment, run_dir_name, tune, ExperimentConfig, RunReport};
use ensemble_mbo::nn::{MlpModel, Proxy};
use ensemble_mbo::space::{DesignPoint, DesignSpace};
use ensemble_mbo::Result as MboResult;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random gradient sets with m in 2..=6, n in 2..=10 and per-model scales
/// spanning two orders of magnitude.
fn random_instances(count: usize, seed: u64) -> Vec<GradientSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(2..=6);
            let n = rng.random_range(2..=10);
            let grads = (0..m)
                .map(|_| {
                    let s = 10f64.powf(rng.random_range(-1.0..1.0));
                    normal_vec(&mut rng, n).into_iter().map(|v| v * s).collect()
                })
                .collect();
            GradientSet::new(grads).unwrap()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const INSTANCES: usize = 1000;
const C_VALUES: [f64; 3] = [0.2, 0.3, 0.5];

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let opts = SolverOptions::default();
    let mut worst_mgda: f64 = 0.0;
    let mut worst_cagrad: f64 = 0.0;
    for gs in random_instances(INSTANCES, 1) {
        let dual = solve_mgda_dual(&gs, &opts).map_err(|e| e.to_string())?;
        let achieved = improvement_rate(&gs, &dual.d).unwrap() - 0.5 * dot(&dual.d, &dual.d);
        let reference = solve_mgda_primal_reference(&gs, 1e-10).map_err(|e| e.to_string())?;
        worst_mgda = worst_mgda.max((achieved - reference.objective).abs());
        for c in C_VALUES {
            let cfg = CagradConfig::new(c).unwrap();
            let dual = solve_cagrad_dual(&gs, cfg, &opts).map_err(|e| e.to_string())?;
            let achieved = improvement_rate(&gs, &dual.d).unwrap();
            let reference =
                solve_cagrad_primal_reference(&gs, cfg, 1e-10).map_err(|e| e.to_string())?;
            worst_cagrad = worst_cagrad.max((achieved - reference.objective).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(worst_mgda <= 1e-4 && worst_cagrad <= 1e-4, || {
        format!("max gap MGDA {worst_mgda:.2e}, CAGrad {worst_cagrad:.2e}")
    })?;
    check(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "{INSTANCES} instances, max gap MGDA {worst_mgda:.2e}, CAGrad {worst_cagrad:.2e}, {secs:.1}s"
    ))
}

fn criterion_2() -> Outcome {
    let opts = SolverOptions::default();
    let mut worst_kkt = f64::NEG_INFINITY;
    let mut worst_simplex: f64 = 0.0;
    for gs in random_instances(INSTANCES, 2) {
        let r = solve_mgda_dual(&gs, &opts).map_err(|e| e.to_string())?;
        let dd = dot(&r.d, &r.d);
        for g in gs.grads() {
            // positive means violated
            worst_kkt = worst_kkt.max(dd - 1e-6 * (1.0 + dd) - dot(g, &r.d));
        }
        let w = r.weights.as_ref().ok_or("MGDA returned no weights")?;
        let w = w.as_slice();
        let sum: f64 = w.iter().sum();
        worst_simplex = worst_simplex.max((sum - 1.0).abs());
        for &wi in w {
            worst_simplex = worst_simplex.max(-wi);
        }
    }
    check(worst_kkt <= 0.0, || format!("KKT violated by {worst_kkt:.2e}"))?;
    check(worst_simplex <= 1e-10, || {
        format!("weights off the simplex by {worst_simplex:.2e}")
    })?;
    Ok(format!(
        "{INSTANCES} instances, simplex error {worst_simplex:.1e}"
    ))
}

fn criterion_3() -> Outcome {
    let opts = SolverOptions::default();
    let mut worst_ball = f64::NEG_INFINITY;
    for gs in random_instances(INSTANCES, 3) {
        for c in C_VALUES {
            let r = solve_cagrad_dual(&gs, CagradConfig::new(c).unwrap(), &opts)
                .map_err(|e| e.to_string())?;
            let g0 = gs.mean();
            let off: Vec<f64> = r.d.iter().zip(g0).map(|(a, b)| a - b).collect();
            worst_ball = worst_ball.max(norm(&off) - c * norm(g0) * (1.0 + 1e-6));
        }
    }
    check(worst_ball <= 0.0, || format!("ball constraint violated by {worst_ball:.2e}"))?;

    let mut worst_mean: f64 = 0.0;
    for gs in random_instances(200, 4) {
        let r = solve_cagrad_dual(&gs, CagradConfig::new(0.0).unwrap(), &opts)
            .map_err(|e| e.to_string())?;
        for (a, b) in r.d.iter().zip(gs.mean()) {
            worst_mean = worst_mean.max((a - b).abs());
        }
    }
    check(worst_mean <= 1e-8, || format!("c=0 differs from mean by {worst_mean:.2e}"))?;

    // m = 1 in 2-D: a dense angular grid over the ball boundary is the oracle.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_single: f64 = 0.0;
    let mut worst_grid: f64 = 0.0;
    for _ in 0..50 {
        let g = normal_vec(&mut rng, 2);
        let gs = GradientSet::new(vec![g.clone()]).unwrap();
        let r = solve_cagrad_dual(&gs, CagradConfig::new(0.5).unwrap(), &opts)
            .map_err(|e| e.to_string())?;
        let radius = 0.5 * norm(&g);
        let mut best = (f64::NEG_INFINITY, [0.0; 2]);
        for k in 0..100_000 {
            let th = k as f64 / 100_000.0 * std::f64::consts::TAU;
            let d = [g[0] + radius * th.cos(), g[1] + radius * th.sin()];
            let v = dot(&d, &g);
            if v > best.0 {
                best = (v, d);
            }
        }
        for i in 0..2 {
            worst_single = worst_single.max((r.d[i] - 1.5 * g[i]).abs());
            worst_grid = worst_grid.max((best.1[i] - 1.5 * g[i]).abs() / norm(&g));
        }
    }
    check(worst_single <= 1e-6, || format!("m=1 differs from 1.5 g by {worst_single:.2e}"))?;
    check(worst_grid <= 1e-3, || format!("grid oracle disagrees by {worst_grid:.2e}"))?;
    Ok(format!(
        "ball slack ok, c=0 error {worst_mean:.1e}, m=1 error {worst_single:.1e}"
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 200 {
        let input = rng.random_range(1..=12);
        let depth = rng.random_range(0..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=16)).collect();
        let model = MlpModel::init(input, &hidden, &mut rng).unwrap();
        let x = normal_vec(&mut rng, input);
        if near_kink(&model, &x, 1e-3) {
            continue;
        }
        let g = model.input_gradient(&x).unwrap();
        let mut fd = vec![0.0; input];
        for j in 0..input {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            fd[j] = (model.forward(&xp).unwrap() - model.forward(&xm).unwrap()) / (2.0 * h);
        }
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let scale = norm(&g).max(norm(&fd));
        let rel = if scale == 0.0 { 0.0 } else { norm(&diff) / scale };
        worst = worst.max(rel);
        checked += 1;
    }
    check(worst < 1e-4, || format!("max relative error {worst:.2e}"))?;
    Ok(format!("{checked} networks, max relative error {worst:.2e}"))
}

/// Whether any hidden pre-activation lies within `margin` of zero.
fn near_kink(model: &MlpModel, x: &[f64], margin: f64) -> bool {
    let layers = model.layers();
    let mut a = x.to_vec();
    for layer in &layers[..layers.len() - 1] {
        let mut next = layer.bias().to_vec();
        for (j, z) in next.iter_mut().enumerate() {
            for (k, v) in a.iter().enumerate() {
                *z += layer.weight(j, k) * v;
            }
        }
        if next.iter().any(|z| z.abs() < margin) {
            return true;
        }
        a = next.into_iter().map(|z| z.max(0.0)).collect();
    }
    false
}

/// `f(x) = -½ (x - c)ᵀ A (x - c)` with symmetric positive definite `A`.
struct Quadratic {
    a: Vec<Vec<f64>>,
    c: Vec<f64>,
}

impl Proxy for Quadratic {
    fn input_dim(&self) -> usize {
        self.c.len()
    }

    fn value_and_gradient(&self, x: &[f64]) -> MboResult<(f64, Vec<f64>)> {
        let r: Vec<f64> = x.iter().zip(&self.c).map(|(a, b)| a - b).collect();
        let ar: Vec<f64> = self.a.iter().map(|row| dot(row, &r)).collect();
        Ok((-0.5 * dot(&r, &ar), ar.into_iter().map(|v| -v).collect()))
    }
}

fn quadratic_ensemble(m: usize, n: usize, seed: u64) -> Vec<Quadratic> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let b: Vec<Vec<f64>> = (0..n).map(|_| normal_vec(&mut rng, n)).collect();
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>() / n as f64;
                }
                a[i][i] += 0.5;
            }
            Quadratic {
                a,
                c: normal_vec(&mut rng, n),
            }
        })
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Minimum norm of the convex hull of `grads`, by enumerating supports and
/// solving each affine least-norm problem exactly.
fn hull_min_norm(grads: &[Vec<f64>]) -> f64 {
    let m = grads.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << m) {
        let s: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = s.len();
        let mut a = vec![vec![0.0; k + 1]; k + 1];
        for (r, &i) in s.iter().enumerate() {
            for (c, &j) in s.iter().enumerate() {
                a[r][c] = dot(&grads[i], &grads[j]);
            }
            a[r][k] = 1.0;
            a[k][r] = 1.0;
        }
        let mut b = vec![0.0; k + 1];
        b[k] = 1.0;
        let Some(x) = gauss_solve(a, b) else { continue };
        if x[..k].iter().any(|&w| w < -1e-12) {
            continue;
        }
        let mut v = vec![0.0; grads[0].len()];
        for (r, &i) in s.iter().enumerate() {
            for (vj, gj) in v.iter_mut().zip(&grads[i]) {
                *vj += x[r] * gj;
            }
        }
        best = best.min(norm(&v));
    }
    best
}

fn criterion_5() -> Outcome {
    let n = 4;
    let models = quadratic_ensemble(4, n, 7);
    let space = DesignSpace::continuous(n).unwrap();
    let start = DesignPoint(vec![3.0, -2.0, 1.0, 4.0]);
    let cfg = |combiner| AscentConfig {
        steps: 10_000,
        step_size: 0.05,
        combiner,
        cagrad_c: 0.5,
        ..AscentConfig::default()
    };
    let grads_at = |x: &[f64]| -> Vec<Vec<f64>> {
        models
            .iter()
            .map(|m| m.value_and_gradient(x).unwrap().1)
            .collect()
    };

    let t = ascend(&start, &models, &space, &cfg(Combiner::Cagrad)).map_err(|e| e.to_string())?;
    let grads = grads_at(&t.final_relaxed);
    let mean: Vec<f64> = (0..n)
        .map(|j| grads.iter().map(|g| g[j]).sum::<f64>() / grads.len() as f64)
        .collect();
    let mean_norm = norm(&mean);
    check(mean_norm < 1e-3, || format!("CAGrad average-gradient norm {mean_norm:.2e}"))?;

    let t = ascend(&start, &models, &space, &cfg(Combiner::Mgda)).map_err(|e| e.to_string())?;
    let hull = hull_min_norm(&grads_at(&t.final_relaxed));
    check(t.final_d_norm < 1e-3, || format!("MGDA final d-norm {:.2e}", t.final_d_norm))?;
    check(hull < 1e-3, || format!("hull min-norm {hull:.2e}"))?;
    Ok(format!(
        "CAGrad |g0| {mean_norm:.1e}, MGDA |d| {:.1e}, hull distance {hull:.1e}",
        t.final_d_norm
    ))
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const TASKS: [&str; 2] = ["minibind", "ridge"];

fn mean_of(reports: &[RunReport], f: impl Fn(&RunReport) -> f64) -> f64 {
    reports.iter().map(f).sum::<f64>() / reports.len() as f64
}

fn criterion_6(out: &Path) -> (Outcome, Vec<RunReport>) {
    let t0 = Instant::now();
    let mut all = Vec::new();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for task in TASKS {
        let mut reports = Vec::new();
        for seed in SEEDS {
            let cfg = ExperimentConfig {
                out: out.to_path_buf(),
                ..ExperimentConfig::for_task(task, seed)
            };
            match run_experiment(&cfg) {
                Ok(r) => reports.push(r),
                Err(e) => return (Err(format!("{task} seed {seed}: {e}")), all),
            }
        }
        let avg = |c: Combiner| mean_of(&reports, |r| r.algorithm(c).unwrap().summary.raw.mean);
        let p50 = |c: Combiner| {
            mean_of(&reports, |r| {
                r.algorithm(c).unwrap().summary.normalized.unwrap().p50
            })
        };
        let base_avg = avg(Combiner::SingleModel);
        let base_p50 = p50(Combiner::SingleModel);
        let mut line = format!("{task}: single avg {base_avg:.4} p50 {base_p50:.4}");
        for c in [Combiner::Mgda, Combiner::Cagrad] {
            line.push_str(&format!("; {} avg {:.4} p50 {:.4}", c.key(), avg(c), p50(c)));
            if avg(c) < base_avg {
                failures.push(format!("{task} {} average below single model", c.key()));
            }
            if p50(c) < base_p50 {
                failures.push(format!("{task} {} p50 below single model", c.key()));
            }
        }
        for r in &reports {
            for a in &r.algorithms {
                if a.algorithm != Combiner::SingleModel
                    && a.summary.normalized.unwrap().max < r.baseline.max_normalized
                {
                    failures.push(format!(
                        "{task} seed {} {} max below dataset",
                        r.seed,
                        a.algorithm.key()
                    ));
                }
            }
        }
        details.push(line);
        all.extend(reports);
    }
    let secs = t0.elapsed().as_secs_f64();
    if secs >= 600.0 {
        failures.push(format!("took {secs:.0}s"));
    }
    let summary = format!("{} ({secs:.0}s)", details.join(" | "));
    if failures.is_empty() {
        (Ok(summary), all)
    } else {
        (Err(format!("{}; {summary}", failures.join(", "))), all)
    }
}

fn criterion_7(reports: &[RunReport], out: &Path) -> Outcome {
    check(!reports.is_empty(), || "no experiment reports available".into())?;
    for r in reports {
        let expected = (r.n_candidates * r.algorithms.len()) as u64;
        check(r.n_candidates == 128, || format!("{} candidates", r.n_candidates))?;
        check(r.oracle_calls.training == 0, || {
            format!("{} seed {}: {} calls in training", r.task, r.seed, r.oracle_calls.training)
        })?;
        check(r.oracle_calls.evaluation == expected, || {
            format!(
                "{} seed {}: {} evaluation calls, expected {expected}",
                r.task, r.seed, r.oracle_calls.evaluation
            )
        })?;
    }
    let cfg = ExperimentConfig::for_task("minibind", 0);
    let summary = tune(&cfg, 4, &out.join("tune")).map_err(|e| e.to_string())?;
    check(summary.oracle_calls == 0, || {
        format!("tuning made {} oracle calls", summary.oracle_calls)
    })?;
    Ok(format!(
        "{} runs: 0 training calls, 128 x 5 evaluation calls each; tuning 0 calls",
        reports.len()
    ))
}

fn files_equal(a: &Path, b: &Path) -> std::result::Result<(), String> {
    let x = std::fs::read(a).map_err(|e| format!("{}: {e}", a.display()))?;
    let y = std::fs::read(b).map_err(|e| format!("{}: {e}", b.display()))?;
    check(x == y, || format!("{} differs", a.file_name().unwrap().to_string_lossy()))
}

fn criterion_8(first: &Path, scratch: &Path) -> Outcome {
    let cfg = ExperimentConfig {
        out: scratch.to_path_buf(),
        ..ExperimentConfig::for_task("minibind", 0)
    };
    run_experiment(&cfg).map_err(|e| e.to_string())?;
    let name = run_dir_name("minibind", 0);
    let (a, b) = (first.join(&name), scratch.join(&name));
    let mut compared = 0;
    for f in ["report.json", "report.md"] {
        files_equal(&a.join(f), &b.join(f))?;
        compared += 1;
    }
    for entry in std::fs::read_dir(a.join("ensemble")).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        files_equal(&p, &b.join("ensemble").join(p.file_name().unwrap()))?;
        compared += 1;
    }
    for c in Combiner::ALL {
        let f = format!("designs_{}.csv", c.key());
        files_equal(&a.join(&f), &b.join(&f))?;
        compared += 1;
    }
    Ok(format!("{compared} artifacts byte-identical"))
}

fn report(n: usize, name: &str, outcome: &Outcome) -> bool {
    let (tag, text) = match outcome {
        Ok(t) => ("PASS", t),
        Err(t) => ("FAIL", t),
    };
    let mut err = std::io::stderr();
    writeln!(err, "criterion {n} [{tag}] {name}: {text}").unwrap();
    outcome.is_ok()
}

fn main() {
    // Optional positional criterion numbers restrict the run; 7 and 8 need 6.
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let want = |n: usize| selected.is_empty() || selected.contains(&n);
    let dir = tempfile::tempdir().expect("tempdir");
    let runs = dir.path().join("runs");
    let mut ok = true;
    let skip = |n: usize, name: &str| {
        writeln!(std::io::stderr(), "criterion {n} [SKIP] {name}").unwrap();
    };
    if want(1) {
        ok &= report(1, "primal-dual equivalence", &criterion_1());
    } else {
        skip(1, "primal-dual equivalence");
    }
    if want(2) {
        ok &= report(2, "MGDA KKT conditions", &criterion_2());
    } else {
        skip(2, "MGDA KKT conditions");
    }
    if want(3) {
        ok &= report(3, "CAGrad feasibility and limits", &criterion_3());
    } else {
        skip(3, "CAGrad feasibility and limits");
    }
    if want(4) {
        ok &= report(4, "input-gradient finite differences", &criterion_4());
    } else {
        skip(4, "input-gradient finite differences");
    }
    if want(5) {
        ok &= report(5, "convergence on concave quadratics", &criterion_5());
    } else {
        skip(5, "convergence on concave quadratics");
    }
    if want(6) || want(7) || want(8) {
        let (c6, reports) = criterion_6(&runs);
        ok &= report(6, "directional reproduction", &c6);
        ok &= report(7, "oracle-call accounting", &criterion_7(&reports, dir.path()));
        ok &= report(8, "determinism", &criterion_8(&runs, &dir.path().join("rerun")));
    } else {
        for (n, name) in [
            (6, "directional reproduction"),
            (7, "oracle-call accounting"),
            (8, "determinism"),
        ] {
            skip(n, name);
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
