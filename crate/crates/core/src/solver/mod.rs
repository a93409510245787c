//! Augmented Lagrangian solver. An outer loop alternates unconstrained
//! minimization of the loss with first-order multiplier updates; the inner
//! loop takes damped Newton steps guarded by a backtracking line search.
//! Every stage is written to the run's [`Trace`].

mod line_search;
mod loss;

pub use line_search::{line_search, LineSearchError, LineSearchOutcome};
pub use loss::{augmented_loss, evaluate_loss, loss_hessian, loss_value, LossEval};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{violation_of, ModelError, Problem};
use crate::scalar::{all_finite, dot, norm2, norm_inf, sub, Scalar};
use crate::trace::{EventPayload, Trace};

#[derive(Debug, Error)]
pub enum SolveError<S: Scalar> {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("invalid starting point: {0}")]
    InvalidStart(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// A non-finite value was produced; the partial run is attached.
    #[error("solver diverged: {reason}")]
    Diverged {
        reason: String,
        partial: Box<SolveResult<S>>,
    },
}

/// Multipliers and penalty weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualState<S> {
    pub kappa: Vec<S>,
    pub lambda: Vec<S>,
    pub mu: S,
}

impl<S: Scalar> DualState<S> {
    /// Zero multipliers with unit penalty weight.
    pub fn initial(equalities: usize, inequalities: usize) -> Self {
        Self {
            kappa: vec![S::zero(); equalities],
            lambda: vec![S::zero(); inequalities],
            mu: S::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub alpha_init: f64,
    /// Backtracking factor in (0, 1).
    pub shrink: f64,
    /// Step-size growth after an accepted step, at least 1.
    pub grow: f64,
    pub wolfe_c1: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub step_tol: f64,
    pub max_inner: u64,
    pub max_outer: u64,
    /// Penalty weight multiplier applied at every dual update.
    pub mu_growth: f64,
    /// Record every `trace_stride`-th rejected line-search probe; 1 keeps all.
    pub trace_stride: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            alpha_init: 1.0,
            shrink: 0.5,
            grow: 1.2,
            wolfe_c1: 1e-4,
            inner_tol: 1e-8,
            outer_tol: 1e-6,
            step_tol: 1e-10,
            max_inner: 1000,
            max_outer: 200,
            mu_growth: 1.0,
            trace_stride: 1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(format!("shrink must lie in (0, 1), got {}", self.shrink));
        }
        if !(self.grow >= 1.0) || !self.grow.is_finite() {
            return Err(format!("grow must be at least 1, got {}", self.grow));
        }
        if !(self.alpha_init > 0.0) || !self.alpha_init.is_finite() {
            return Err(format!("alpha_init must be positive, got {}", self.alpha_init));
        }
        if !(self.wolfe_c1 > 0.0 && self.wolfe_c1 < 1.0) {
            return Err(format!("wolfe_c1 must lie in (0, 1), got {}", self.wolfe_c1));
        }
        for (name, v) in [
            ("inner_tol", self.inner_tol),
            ("outer_tol", self.outer_tol),
            ("step_tol", self.step_tol),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.mu_growth >= 1.0) || !self.mu_growth.is_finite() {
            return Err(format!("mu_growth must be at least 1, got {}", self.mu_growth));
        }
        if self.trace_stride == 0 {
            return Err("trace_stride must be positive".into());
        }
        Ok(())
    }

    /// Applies one `key=value` override, e.g. `grow=2.0`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let mut obj = serde_json::to_value(&*self).expect("options serialize");
        let map = obj.as_object_mut().expect("options are an object");
        if !map.contains_key(key) {
            return Err(format!("unknown solver option `{key}`"));
        }
        let parsed: serde_json::Value = serde_json::from_str(value)
            .map_err(|_| format!("option `{key}`: `{value}` is not a number"))?;
        map.insert(key.to_string(), parsed);
        *self = serde_json::from_value(obj).map_err(|e| format!("option `{key}`: {e}"))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<S> {
    pub x_star: Vec<S>,
    pub duals: DualState<S>,
    pub converged: bool,
    /// `max_violation(x_star) ≤ outer_tol`.
    pub feasible: bool,
    pub max_violation: S,
    pub kkt_residual: S,
    pub outer_iterations: u64,
    pub trace: Trace<S>,
}

/// How an inner minimization ended.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerReport<S> {
    pub x: Vec<S>,
    pub eval: LossEval<S>,
    /// Stopped at a stationary point (gradient or step tolerance, or the
    /// line search ran into round-off) rather than an iteration cap or a
    /// failed line search.
    pub stationary: bool,
    pub iterations: u64,
}

/// `κ ← κ + 2μh`, `λ ← max(0, λ + 2μg)`, `μ ← μ·mu_growth`.
pub fn update_duals<S: Scalar>(duals: &DualState<S>, h: &[S], g: &[S], mu_growth: S) -> DualState<S> {
    let two_mu = duals.mu + duals.mu;
    DualState {
        kappa: duals.kappa.iter().zip(h).map(|(&k, &v)| k + two_mu * v).collect(),
        lambda: duals
            .lambda
            .iter()
            .zip(g)
            .map(|(&l, &v)| (l + two_mu * v).max(S::zero()))
            .collect(),
        mu: duals.mu * mu_growth,
    }
}

/// Largest violation among the first-order optimality conditions:
/// stationarity of the Lagrangian, primal feasibility, complementarity and
/// dual feasibility.
pub fn kkt_residual<S: Scalar>(problem: &Problem<S>, x: &[S], duals: &DualState<S>) -> Result<S, ModelError> {
    let (_, mut grad) = problem.eval_objective(x)?;
    let c = problem.eval_constraints(x)?;
    for (row, &k) in c.jh.iter().zip(&duals.kappa) {
        for (gj, &r) in grad.iter_mut().zip(row) {
            *gj = *gj + k * r;
        }
    }
    for (row, &l) in c.jg.iter().zip(&duals.lambda) {
        for (gj, &r) in grad.iter_mut().zip(row) {
            *gj = *gj + l * r;
        }
    }
    let mut residual = norm_inf(&grad).max(violation_of(&c.h, &c.g));
    for (&l, &gv) in duals.lambda.iter().zip(&c.g) {
        residual = residual.max((l * gv).abs()).max(-l);
    }
    Ok(residual)
}

/// Damped Newton direction `(H + νI)δ = −∇L`, with ν raised tenfold from
/// 1e-10 until `δ` is a descent direction. Steepest descent when the
/// problem has no second-order information or damping runs out.
fn search_direction<S: Scalar>(problem: &Problem<S>, x: &[S], duals: &DualState<S>, at: &LossEval<S>) -> Vec<S> {
    let steepest: Vec<S> = at.grad.iter().map(|&g| -g).collect();
    let Some(hess) = loss_hessian(problem, x, duals, at) else {
        return steepest;
    };
    let mut nu = S::lit(1e-10);
    for _ in 0..24 {
        let mut damped = hess.clone();
        damped.add_diagonal(nu);
        if let Some(chol) = damped.cholesky() {
            let delta = chol.solve(&steepest);
            if all_finite(&delta) && dot(&delta, &at.grad) < S::zero() {
                return delta;
            }
        }
        nu = nu * S::lit(10.0);
    }
    steepest
}

/// Working state of one run, threaded through the inner loops.
struct Run<'a, S: Scalar> {
    problem: &'a Problem<S>,
    opts: &'a SolverOptions,
    trace: Trace<S>,
    /// Step size carried between iterations of one inner minimization.
    alpha: S,
    probes: u64,
}

impl<S: Scalar> Run<'_, S> {
    fn inner_minimize(&mut self, x: Vec<S>, duals: &DualState<S>) -> Result<InnerReport<S>, ModelError> {
        let problem = self.problem;
        let opts = self.opts;
        let alpha_init = S::lit(opts.alpha_init);
        let grow = S::lit(opts.grow);
        let mut x = x;
        self.alpha = alpha_init;
        let mut cur = evaluate_loss(problem, &x, duals)?;
        let mut stationary = false;
        let mut iterations = 0;
        while iterations < opts.max_inner {
            if cur.grad_norm() <= S::lit(opts.inner_tol) {
                stationary = true;
                break;
            }
            iterations += 1;
            let delta = search_direction(problem, &x, duals, &cur);
            let mut sink = self.sink();
            let outcome = line_search(
                |y: &[S]| evaluate_loss(problem, y, duals),
                &x,
                &cur,
                &delta,
                self.alpha,
                opts,
                &mut sink,
            );
            self.absorb(sink);
            match outcome {
                Ok(step) => {
                    self.trace.record(EventPayload::XUpdate { x: step.x.clone() });
                    let moved = norm2(&sub(&step.x, &x));
                    self.alpha = (step.alpha * grow).min(alpha_init);
                    x = step.x;
                    cur = step.eval;
                    if moved <= S::lit(opts.step_tol) {
                        stationary = true;
                        break;
                    }
                }
                Err(LineSearchError::Stalled) => {
                    stationary = true;
                    break;
                }
                Err(LineSearchError::Model(e)) => return Err(e),
                Err(_) => break,
            }
        }
        if cur.grad_norm() <= S::lit(opts.inner_tol) {
            stationary = true;
        }
        Ok(InnerReport {
            x,
            eval: cur,
            stationary,
            iterations,
        })
    }

    /// Scratch trace for one line search; merged back by [`Run::absorb`]
    /// so rejected probes can be thinned by `trace_stride`.
    fn sink(&self) -> Trace<S> {
        Trace {
            header: self.trace.header.clone(),
            events: Vec::new(),
        }
    }

    fn absorb(&mut self, sink: Trace<S>) {
        let stride = self.opts.trace_stride.max(1);
        let evals = sink
            .events
            .iter()
            .filter(|e| matches!(e.payload, EventPayload::Eval { .. }))
            .count();
        let mut seen = 0;
        for e in sink.events {
            if let EventPayload::Eval { .. } = e.payload {
                seen += 1;
                let last = seen == evals;
                self.probes += 1;
                if !last && stride > 1 && !self.probes.is_multiple_of(stride) {
                    continue;
                }
            }
            self.trace.record(e.payload);
        }
    }
}

fn record_eval<S: Scalar>(trace: &mut Trace<S>, x: &[S], e: &LossEval<S>, alpha: S) {
    trace.record(EventPayload::Eval {
        x: x.to_vec(),
        f: e.f,
        h: e.h.clone(),
        g: e.g.clone(),
        loss: e.value,
        grad_norm: e.grad_norm(),
        alpha,
    });
}

/// One inner minimization of the loss from `x` with fixed `duals`,
/// recording into `trace`. The step size starts at `alpha_init`.
pub fn inner_minimize<S: Scalar>(
    problem: &Problem<S>,
    x: &[S],
    duals: &DualState<S>,
    opts: &SolverOptions,
    trace: &mut Trace<S>,
) -> Result<InnerReport<S>, ModelError> {
    let mut run = Run {
        problem,
        opts,
        trace: std::mem::replace(trace, Trace { header: trace.header.clone(), events: Vec::new() }),
        alpha: S::lit(opts.alpha_init),
        probes: 0,
    };
    let report = run.inner_minimize(x.to_vec(), duals);
    *trace = run.trace;
    report
}

pub fn solve<S: Scalar>(problem: &Problem<S>, x_init: &[S], opts: &SolverOptions) -> Result<SolveResult<S>, SolveError<S>> {
    opts.validate().map_err(SolveError::InvalidOptions)?;
    if x_init.len() != problem.n() {
        return Err(ModelError::DimensionMismatch {
            expected: problem.n(),
            got: x_init.len(),
        }
        .into());
    }
    if !all_finite(x_init) {
        return Err(SolveError::InvalidStart("x_init has non-finite entries".into()));
    }

    let mut run = Run {
        problem,
        opts,
        trace: Trace::new(problem.meta(), opts.clone(), x_init.to_vec()),
        alpha: S::lit(opts.alpha_init),
        probes: 0,
    };
    let mu_growth = S::lit(opts.mu_growth);
    let outer_tol = S::lit(opts.outer_tol);
    let mut duals = DualState::initial(problem.equalities.len(), problem.inequalities.len());
    let mut x = x_init.to_vec();

    let start = evaluate_loss(problem, &x, &duals)?;
    record_eval(&mut run.trace, &x, &start, S::zero());
    let mut last_eval = start;
    let mut converged = false;
    let mut outer = 0;
    let mut failure = (!last_eval.is_finite()).then(|| "non-finite loss at x_init".to_string());

    while failure.is_none() && outer < opts.max_outer {
        run.trace.record(EventPayload::OuterIter { counter: outer });
        outer += 1;
        let report = run.inner_minimize(x, &duals)?;
        x = report.x;
        last_eval = report.eval;
        let violation = violation_of(&last_eval.h, &last_eval.g);
        let updated = update_duals(&duals, &last_eval.h, &last_eval.g, mu_growth);
        let previous = std::mem::replace(&mut duals, updated);
        let dual_step = norm_inf(&sub(&duals.kappa, &previous.kappa))
            .max(norm_inf(&sub(&duals.lambda, &previous.lambda)));
        run.trace.record(EventPayload::DualUpdate {
            kappa: duals.kappa.clone(),
            lambda: duals.lambda.clone(),
            mu: duals.mu,
        });
        if !(all_finite(&duals.kappa) && all_finite(&duals.lambda) && duals.mu.is_finite()) {
            failure = Some("non-finite dual update".into());
            break;
        }
        // Weakly active inequalities keep moving their multipliers long
        // after the iterate looks feasible, so also wait for the duals.
        if violation <= outer_tol && report.stationary && dual_step <= outer_tol {
            converged = true;
            break;
        }
    }

    // The trajectory must end at the returned point; after a rejected
    // final probe it would not, so log the point once more.
    let last_logged = run.trace.events.iter().rev().find_map(|e| match &e.payload {
        EventPayload::Eval { x, .. } => Some(x.clone()),
        _ => None,
    });
    if last_logged.as_deref() != Some(x.as_slice()) {
        let closing = evaluate_loss(problem, &x, &duals)?;
        record_eval(&mut run.trace, &x, &closing, S::zero());
    }

    let max_violation = violation_of(&last_eval.h, &last_eval.g);
    let kkt = kkt_residual(problem, &x, &duals)?;
    match &failure {
        None if converged => run.trace.record(EventPayload::Converged {
            max_violation,
            kkt_residual: kkt,
        }),
        None => run.trace.record(EventPayload::Aborted {
            reason: format!("max_outer ({}) reached", opts.max_outer),
        }),
        Some(reason) => run.trace.record(EventPayload::Aborted {
            reason: reason.clone(),
        }),
    }
    let result = SolveResult {
        feasible: max_violation <= outer_tol,
        x_star: x,
        duals,
        converged,
        max_violation,
        kkt_residual: kkt,
        outer_iterations: outer,
        trace: run.trace,
    };
    match failure {
        Some(reason) => Err(SolveError::Diverged {
            reason,
            partial: Box::new(result),
        }),
        None => Ok(result),
    }
}
