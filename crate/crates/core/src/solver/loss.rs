//! The augmented Lagrangian
//! `L(x) = f + κᵀh + λᵀg + μ‖h‖² + μ Σ_j [g_j > 0] g_j²`
//! and its first and (approximate) second derivatives.

use crate::linalg::Matrix;
use crate::model::{ModelError, Problem};
use crate::scalar::{norm2, Scalar};

use super::DualState;

/// Everything computed by one evaluation of the loss at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval<S> {
    pub value: S,
    pub grad: Vec<S>,
    pub f: S,
    pub h: Vec<S>,
    pub g: Vec<S>,
}

impl<S: Scalar> LossEval<S> {
    pub fn grad_norm(&self) -> S {
        norm2(&self.grad)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|v| v.is_finite())
    }
}

pub fn evaluate_loss<S: Scalar>(
    problem: &Problem<S>,
    x: &[S],
    duals: &DualState<S>,
) -> Result<LossEval<S>, ModelError> {
    let (f, mut grad) = problem.eval_objective(x)?;
    let c = problem.eval_constraints(x)?;
    let mu = duals.mu;
    let two_mu = mu + mu;
    let mut value = f;
    for ((&hi, row), &k) in c.h.iter().zip(&c.jh).zip(&duals.kappa) {
        value = value + k * hi + mu * hi * hi;
        let w = k + two_mu * hi;
        for (gj, &r) in grad.iter_mut().zip(row) {
            *gj = *gj + w * r;
        }
    }
    for ((&gi, row), &l) in c.g.iter().zip(&c.jg).zip(&duals.lambda) {
        let active = gi > S::zero();
        value = value + l * gi;
        let mut w = l;
        if active {
            value = value + mu * gi * gi;
            w = w + two_mu * gi;
        }
        for (gj, &r) in grad.iter_mut().zip(row) {
            *gj = *gj + w * r;
        }
    }
    Ok(LossEval {
        value,
        grad,
        f,
        h: c.h,
        g: c.g,
    })
}

/// Loss value from already evaluated parts, accumulated in the same order
/// as [`evaluate_loss`].
pub fn loss_value<S: Scalar>(f: S, h: &[S], g: &[S], duals: &DualState<S>) -> S {
    let mu = duals.mu;
    let mut value = f;
    for (&hi, &k) in h.iter().zip(&duals.kappa) {
        value = value + k * hi + mu * hi * hi;
    }
    for (&gi, &l) in g.iter().zip(&duals.lambda) {
        value = value + l * gi;
        if gi > S::zero() {
            value = value + mu * gi * gi;
        }
    }
    value
}

/// Value and gradient of the augmented Lagrangian.
pub fn augmented_loss<S: Scalar>(
    problem: &Problem<S>,
    x: &[S],
    duals: &DualState<S>,
) -> Result<(S, Vec<S>), ModelError> {
    let e = evaluate_loss(problem, x, duals)?;
    Ok((e.value, e.grad))
}

/// Hessian of the loss. Functions without second derivatives contribute
/// only their Gauss-Newton terms. `None` when no function in the problem
/// supplies second-order information.
pub fn loss_hessian<S: Scalar>(
    problem: &Problem<S>,
    x: &[S],
    duals: &DualState<S>,
    at: &LossEval<S>,
) -> Option<Matrix<S>> {
    if !problem.has_second_order() {
        return None;
    }
    let n = problem.n();
    let mut hess = Matrix::zeros(n);
    let mu = duals.mu;
    let two_mu = mu + mu;
    if problem.objective.has_hessian() {
        problem.objective.add_hessian(x, S::one(), &mut hess);
    }
    let mut row = vec![S::zero(); n];
    for ((c, &hi), &k) in problem.equalities.iter().zip(&at.h).zip(&duals.kappa) {
        c.func.eval(x, &mut row);
        hess.add_outer(two_mu, &row);
        if c.func.has_hessian() {
            c.func.add_hessian(x, k + two_mu * hi, &mut hess);
        }
    }
    for ((c, &gi), &l) in problem.inequalities.iter().zip(&at.g).zip(&duals.lambda) {
        let active = gi > S::zero();
        if !active && l == S::zero() {
            continue;
        }
        let weight = if active { l + two_mu * gi } else { l };
        if active {
            c.func.eval(x, &mut row);
            hess.add_outer(two_mu, &row);
        }
        if c.func.has_hessian() {
            c.func.add_hessian(x, weight, &mut hess);
        }
    }
    Some(hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClosureFn, ConstraintKind, ConstraintSpec};
    use crate::suite;
    use std::sync::Arc;

    fn constant(v: f64) -> Arc<dyn crate::model::Function<f64>> {
        ClosureFn::new(move |_: &[f64], g: &mut [f64]| {
            g.iter_mut().for_each(|x| *x = 0.0);
            v
        })
        .into_arc()
    }

    fn problem(f: f64, h: &[f64], g: &[f64]) -> Problem<f64> {
        let mut cs = Vec::new();
        for (i, &v) in h.iter().enumerate() {
            cs.push(ConstraintSpec::new("h", format!("h{i}"), ConstraintKind::Equality, vec![0], constant(v)));
        }
        for (i, &v) in g.iter().enumerate() {
            cs.push(ConstraintSpec::new("g", format!("g{i}"), ConstraintKind::Inequality, vec![0], constant(v)));
        }
        Problem::new("c", vec![1], constant(f), cs, vec![0.0]).unwrap()
    }

    fn duals(kappa: &[f64], lambda: &[f64]) -> DualState<f64> {
        DualState { kappa: kappa.to_vec(), lambda: lambda.to_vec(), mu: 1.0 }
    }

    #[test]
    fn pure_equality_penalty() {
        let p = problem(0.0, &[1.0], &[]);
        assert_eq!(augmented_loss(&p, &[0.0], &duals(&[0.0], &[])).unwrap().0, 1.0);
    }

    #[test]
    fn inactive_inequality_contributes_nothing() {
        let p = problem(2.0, &[], &[-3.0]);
        assert_eq!(augmented_loss(&p, &[0.0], &duals(&[], &[0.0])).unwrap().0, 2.0);
    }

    #[test]
    fn active_inequality_multiplier_and_penalty() {
        let p = problem(0.0, &[], &[2.0]);
        assert_eq!(augmented_loss(&p, &[0.0], &duals(&[], &[1.0])).unwrap().0, 6.0);
    }

    #[test]
    fn value_only_path_agrees_bitwise() {
        let p = suite::make_disk_rosenbrock::<f64>();
        let d = DualState { kappa: vec![], lambda: vec![0.3], mu: 2.0 };
        for x in [[0.9, 0.8], [0.1, -0.2], [1.5, 1.5]] {
            let e = evaluate_loss(&p, &x, &d).unwrap();
            assert_eq!(loss_value(e.f, &e.h, &e.g, &d).to_bits(), e.value.to_bits());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = suite::make_disk_rosenbrock::<f64>();
        let d = DualState { kappa: vec![], lambda: vec![0.3], mu: 2.0 };
        for x in [[0.9, 0.8], [0.1, -0.2]] {
            let (_, grad) = augmented_loss(&p, &x, &d).unwrap();
            for i in 0..2 {
                let mut up = x;
                let mut dn = x;
                up[i] += 1e-6;
                dn[i] -= 1e-6;
                let fd = (augmented_loss(&p, &up, &d).unwrap().0 - augmented_loss(&p, &dn, &d).unwrap().0) / 2e-6;
                assert!((fd - grad[i]).abs() < 1e-5, "{fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let p = suite::get_problem::<f64>("waypoint_T3_free").unwrap();
        let mut scene = p.scene.clone().unwrap();
        scene.obstacles.push(suite::Obstacle { center: vec![1.0, 0.1], radius: 0.5 });
        let p = suite::make_waypoint_path::<f64>(&scene).unwrap();
        let d = DualState { kappa: vec![0.1, -0.2, 0.3, 0.0], lambda: vec![0.0, 0.5, 0.0], mu: 1.0 };
        let x = [0.1, 0.0, 0.9, 0.05, 2.1, -0.1];
        let at = evaluate_loss(&p, &x, &d).unwrap();
        let h = loss_hessian(&p, &x, &d, &at).unwrap();
        for j in 0..6 {
            let mut up = x;
            let mut dn = x;
            up[j] += 1e-6;
            dn[j] -= 1e-6;
            let gu = augmented_loss(&p, &up, &d).unwrap().1;
            let gd = augmented_loss(&p, &dn, &d).unwrap().1;
            for i in 0..6 {
                let fd = (gu[i] - gd[i]) / 2e-6;
                assert!((fd - h[(i, j)]).abs() < 1e-5, "({i},{j}) {fd} vs {}", h[(i, j)]);
            }
        }
    }
}
