//! Backtracking line search enforcing the Armijo sufficient-decrease
//! condition. Every probe is recorded in the trace as an eval event and
//! every rejection as a step-size shrink.

use thiserror::Error;

use crate::model::ModelError;
use crate::scalar::{axpy, dot, Scalar};
use crate::trace::{EventPayload, Trace};

use super::loss::LossEval;
use super::SolverOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineSearchError<S: Scalar> {
    #[error("search direction is not a descent direction (slope {slope})")]
    NotDescent { slope: S },
    /// The step size underflowed without satisfying sufficient decrease.
    #[error("line search failed; best loss seen {best_loss}")]
    Failed { best_x: Vec<S>, best_loss: S },
    /// The decrease Armijo demands is below the resolution of the current
    /// loss value, so no representable step can be told apart from zero.
    #[error("line search stalled at round-off level")]
    Stalled,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome<S> {
    pub alpha: S,
    pub x: Vec<S>,
    pub eval: LossEval<S>,
}

fn record_probe<S: Scalar>(trace: &mut Trace<S>, x: &[S], e: &LossEval<S>, alpha: S) {
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

/// Tries `a = alpha, alpha·shrink, alpha·shrink², …` and returns the first
/// probe `x + aδ` with `L(x + aδ) ≤ L(x) + c1·a·∇L(x)·δ` and
/// `L(x + aδ) < L(x)`.
pub fn line_search<S, F>(
    mut loss: F,
    x: &[S],
    current: &LossEval<S>,
    delta: &[S],
    alpha: S,
    opts: &SolverOptions,
    trace: &mut Trace<S>,
) -> Result<LineSearchOutcome<S>, LineSearchError<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> Result<LossEval<S>, ModelError>,
{
    let slope = dot(&current.grad, delta);
    if !(slope < S::zero()) || alpha <= S::zero() {
        return Err(LineSearchError::NotDescent { slope });
    }
    let c1 = S::lit(opts.wolfe_c1);
    let shrink = S::lit(opts.shrink);
    let floor = alpha * S::lit(1e-16);
    let mut a = alpha;
    let mut best: Option<(S, Vec<S>)> = None;
    loop {
        let probe = axpy(x, a, delta);
        let e = loss(&probe)?;
        record_probe(trace, &probe, &e, a);
        let bound = current.value + c1 * a * slope;
        if e.value.is_finite() && e.value <= bound && e.value < current.value {
            return Ok(LineSearchOutcome { alpha: a, x: probe, eval: e });
        }
        if e.value.is_finite() && best.as_ref().is_none_or(|(v, _)| e.value < *v) {
            best = Some((e.value, probe));
        }
        if e.value.is_finite() && bound >= current.value {
            return Err(LineSearchError::Stalled);
        }
        let next = a * shrink;
        if next < floor {
            let (best_loss, best_x) = best.unwrap_or((current.value, x.to_vec()));
            return Err(LineSearchError::Failed { best_x, best_loss });
        }
        trace.record(EventPayload::StepsizeShrink {
            alpha_old: a,
            alpha_new: next,
        });
        a = next;
    }
}
