//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls the code paths it is used to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use nlpscope_core::model::Function;
use nlpscope_core::DualState;
use nlpscope_core::trace::EventPayload;
use nlpscope_core::{Problem, Trace};

/// Largest relative deviation between the analytic gradient of `f` and a
/// central difference, over every coordinate.
pub fn fd_gradient_deviation(f: &dyn Function<f64>, x: &[f64], eps: f64) -> f64 {
    let mut grad = vec![0.0; x.len()];
    f.eval(x, &mut grad);
    let mut worst: f64 = 0.0;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f.value(&probe);
        probe[i] = x[i] - eps;
        let down = f.value(&probe);
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * eps);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
    }
    worst
}

fn rosenbrock(x: f64, y: f64) -> f64 {
    100.0 * (y - x * x).powi(2) + (1.0 - x).powi(2)
}

/// Minimizer of the Rosenbrock function over the closed unit disk, by a
/// dense polar grid followed by golden-section refinement along the
/// circle (the grid shows the minimum sits on the boundary).
pub fn disk_rosenbrock_oracle() -> [f64; 2] {
    let (nr, nt) = (400, 4000);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=nr {
        let r = i as f64 / nr as f64;
        for j in 0..nt {
            let th = std::f64::consts::TAU * j as f64 / nt as f64;
            let v = rosenbrock(r * th.cos(), r * th.sin());
            if v < best.0 {
                best = (v, r, th);
            }
        }
    }
    assert_eq!(best.1, 1.0, "grid minimum must lie on the boundary");
    let f = |th: f64| rosenbrock(th.cos(), th.sin());
    let step = std::f64::consts::TAU / nt as f64;
    let (mut a, mut b) = (best.2 - 2.0 * step, best.2 + 2.0 * step);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-14 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let th = 0.5 * (a + b);
    [th.cos(), th.sin()]
}

fn loss(problem: &Problem, x: &[f64], duals: &DualState) -> (f64, Vec<f64>) {
    // Recomputed from the functions directly, independent of the solver.
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut value = problem.objective.eval(x, &mut grad);
    let mut scratch = vec![0.0; n];
    for (c, &k) in problem.equalities.iter().zip(&duals.kappa) {
        let h = c.func.eval(x, &mut scratch);
        value += k * h + duals.mu * h * h;
        for (g, s) in grad.iter_mut().zip(&scratch) {
            *g += (k + 2.0 * duals.mu * h) * s;
        }
    }
    for (c, &l) in problem.inequalities.iter().zip(&duals.lambda) {
        let gv = c.func.eval(x, &mut scratch);
        let active = gv > 0.0;
        value += l * gv + if active { duals.mu * gv * gv } else { 0.0 };
        let w = l + if active { 2.0 * duals.mu * gv } else { 0.0 };
        for (g, s) in grad.iter_mut().zip(&scratch) {
            *g += w * s;
        }
    }
    (value, grad)
}

#[derive(Debug, Default)]
pub struct Audit {
    pub accepted_steps: usize,
    pub armijo_failures: Vec<String>,
    pub monotone_failures: Vec<String>,
    pub negative_lambda: Vec<String>,
    pub replay_worst: f64,
}

impl Audit {
    pub fn clean(&self, replay_tol: f64) -> bool {
        self.armijo_failures.is_empty()
            && self.monotone_failures.is_empty()
            && self.negative_lambda.is_empty()
            && self.replay_worst <= replay_tol
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }
}

/// Replays a trace against the problem. Accepted probes are the evals
/// immediately followed by an x-update; the base point of each step is the
/// previous accepted point (or the point an inner minimization starts
/// from), and the search direction is recovered as `(x' - x) / a`.
pub fn audit_trace(problem: &Problem, trace: &Trace) -> Audit {
    let c1 = trace.header.options.wolfe_c1;
    let mut audit = Audit::default();
    let mut duals = DualState::initial(problem.equalities.len(), problem.inequalities.len());
    let mut base: Vec<f64> = trace.header.x_init.clone();
    let mut last_eval: Option<(Vec<f64>, f64, f64)> = None;
    let mut inner_losses: Vec<f64> = Vec::new();
    for e in &trace.events {
        match &e.payload {
            EventPayload::Eval { x, f, h, g, alpha, loss: l, .. } => {
                let fv = problem.objective.value(x);
                let mut worst = rel(fv, *f);
                for (c, &v) in problem.equalities.iter().zip(h) {
                    worst = worst.max(rel(c.func.value(x), v));
                }
                for (c, &v) in problem.inequalities.iter().zip(g) {
                    worst = worst.max(rel(c.func.value(x), v));
                }
                audit.replay_worst = audit.replay_worst.max(worst);
                last_eval = Some((x.clone(), *l, *alpha));
            }
            EventPayload::XUpdate { x } => {
                let Some((px, pl, a)) = last_eval.clone() else {
                    audit.armijo_failures.push(format!("seq {}: update without probe", e.seq));
                    continue;
                };
                if &px != x {
                    audit.armijo_failures.push(format!("seq {}: update differs from last probe", e.seq));
                }
                let (l0, g0) = loss(problem, &base, &duals);
                let slope: f64 = g0.iter().zip(x.iter().zip(&base)).map(|(gi, (xn, xb))| gi * (xn - xb) / a).sum();
                let bound = l0 + c1 * a * slope;
                if pl > bound + 1e-12 * l0.abs().max(1.0) {
                    audit.armijo_failures.push(format!("seq {}: L'={pl} > bound {bound}", e.seq));
                }
                let prev = inner_losses.last().copied().unwrap_or(l0);
                if pl >= prev {
                    audit.monotone_failures.push(format!("seq {}: L'={pl} >= {prev}", e.seq));
                }
                inner_losses.push(pl);
                audit.accepted_steps += 1;
                base = x.clone();
            }
            EventPayload::DualUpdate { kappa, lambda, mu } => {
                if let Some(l) = lambda.iter().find(|&&l| l < 0.0 || l.is_nan()) {
                    audit.negative_lambda.push(format!("seq {}: lambda {l}", e.seq));
                }
                duals = DualState { kappa: kappa.clone(), lambda: lambda.clone(), mu: *mu };
                inner_losses.clear();
            }
            EventPayload::OuterIter { .. } => inner_losses.clear(),
            _ => {}
        }
    }
    audit
}

/// Orthogonal projector onto the top-`k` eigenvectors of the sample
/// covariance, from nalgebra's dense symmetric eigensolver.
pub fn pca_projector_oracle(points: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    let m = points.len();
    let n = points[0].len();
    let data = DMatrix::from_fn(m, n, |i, j| points[i][j]);
    let mean = data.row_mean();
    let centered = DMatrix::from_fn(m, n, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (m as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut p = DMatrix::zeros(n, n);
    for &i in order.iter().take(k) {
        let v = eig.eigenvectors.column(i);
        p += v * v.transpose();
    }
    p
}

pub fn projector(components: &[Vec<f64>]) -> DMatrix<f64> {
    let n = components[0].len();
    let mut p = DMatrix::zeros(n, n);
    for c in components {
        let v = nalgebra::DVector::from_column_slice(c);
        p += &v * v.transpose();
    }
    p
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
}
