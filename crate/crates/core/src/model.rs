//! The optimization problem: decision vector layout, objective and named,
//! time-tagged scalar constraints with analytic first derivatives.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{norm_inf, Scalar};
use crate::suite::WaypointSceneSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// A differentiable scalar function of the full decision vector.
pub trait Function<S: Scalar>: Send + Sync {
    /// Returns `f(x)` and overwrites `grad` with `∇f(x)`.
    fn eval(&self, x: &[S], grad: &mut [S]) -> S;

    fn value(&self, x: &[S]) -> S {
        let mut scratch = vec![S::zero(); x.len()];
        self.eval(x, &mut scratch)
    }

    fn has_hessian(&self) -> bool {
        false
    }

    /// `hess += weight * ∇²f(x)`. Only called when [`has_hessian`] is true.
    ///
    /// [`has_hessian`]: Function::has_hessian
    fn add_hessian(&self, _x: &[S], _weight: S, _hess: &mut Matrix<S>) {}
}

type ValueGrad<S> = dyn Fn(&[S], &mut [S]) -> S + Send + Sync;
type HessianAcc<S> = dyn Fn(&[S], S, &mut Matrix<S>) + Send + Sync;

/// [`Function`] backed by closures.
pub struct ClosureFn<S> {
    value_grad: Box<ValueGrad<S>>,
    hessian: Option<Box<HessianAcc<S>>>,
}

impl<S: Scalar> ClosureFn<S> {
    pub fn new(value_grad: impl Fn(&[S], &mut [S]) -> S + Send + Sync + 'static) -> Self {
        Self {
            value_grad: Box::new(value_grad),
            hessian: None,
        }
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[S], S, &mut Matrix<S>) + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }

    pub fn into_arc(self) -> Arc<dyn Function<S>> {
        Arc::new(self)
    }
}

impl<S: Scalar> Function<S> for ClosureFn<S> {
    fn eval(&self, x: &[S], grad: &mut [S]) -> S {
        (self.value_grad)(x, grad)
    }

    fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    fn add_hessian(&self, x: &[S], weight: S, hess: &mut Matrix<S>) {
        if let Some(h) = &self.hessian {
            h(x, weight, hess)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Equality,
    Inequality,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::Equality => f.write_str("equality"),
            ConstraintKind::Inequality => f.write_str("inequality"),
        }
    }
}

#[derive(Clone)]
pub struct ConstraintSpec<S> {
    pub group: String,
    pub instance_id: String,
    pub kind: ConstraintKind,
    /// Configuration indices the constraint touches, sorted and nonempty.
    pub time_indices: Vec<usize>,
    pub func: Arc<dyn Function<S>>,
}

impl<S: Scalar> ConstraintSpec<S> {
    pub fn new(
        group: impl Into<String>,
        instance_id: impl Into<String>,
        kind: ConstraintKind,
        time_indices: Vec<usize>,
        func: Arc<dyn Function<S>>,
    ) -> Self {
        Self {
            group: group.into(),
            instance_id: instance_id.into(),
            kind,
            time_indices,
            func,
        }
    }

    pub fn meta(&self) -> ConstraintMeta {
        ConstraintMeta {
            group: self.group.clone(),
            instance_id: self.instance_id.clone(),
            kind: self.kind,
            time_indices: self.time_indices.clone(),
        }
    }
}

impl<S> fmt::Debug for ConstraintSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSpec")
            .field("group", &self.group)
            .field("instance_id", &self.instance_id)
            .field("kind", &self.kind)
            .field("time_indices", &self.time_indices)
            .finish_non_exhaustive()
    }
}

/// Serializable description of one constraint, as stored in trace headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintMeta {
    pub group: String,
    pub instance_id: String,
    pub kind: ConstraintKind,
    pub time_indices: Vec<usize>,
}

/// Serializable problem metadata, as stored in trace headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_count: usize,
    pub config_dims: Vec<usize>,
    pub equalities: Vec<ConstraintMeta>,
    pub inequalities: Vec<ConstraintMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<WaypointSceneSpec>,
}

impl ProblemMeta {
    pub fn constraint(&self, instance_id: &str) -> Option<&ConstraintMeta> {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .find(|c| c.instance_id == instance_id)
    }

    /// Position of a constraint within its kind's declaration order.
    pub fn constraint_index(&self, instance_id: &str) -> Option<(ConstraintKind, usize)> {
        if let Some(i) = self.equalities.iter().position(|c| c.instance_id == instance_id) {
            return Some((ConstraintKind::Equality, i));
        }
        self.inequalities
            .iter()
            .position(|c| c.instance_id == instance_id)
            .map(|i| (ConstraintKind::Inequality, i))
    }

    /// Per-configuration dimension if every configuration has the same size.
    pub fn uniform_config_dim(&self) -> Option<usize> {
        let first = *self.config_dims.first()?;
        self.config_dims.iter().all(|&d| d == first).then_some(first)
    }
}

/// Constraint values and Jacobians at one point, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEval<S> {
    pub h: Vec<S>,
    pub g: Vec<S>,
    /// One row per equality.
    pub jh: Vec<Vec<S>>,
    /// One row per inequality.
    pub jg: Vec<Vec<S>>,
}

/// Maximum absolute deviation between analytic and central-difference
/// gradients, per function.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport<S> {
    pub objective: S,
    pub equalities: Vec<S>,
    pub inequalities: Vec<S>,
}

impl<S: Scalar> GradientReport<S> {
    pub fn max_deviation(&self) -> S {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .fold(self.objective, |m, &v| m.max(v))
    }
}

#[derive(Clone)]
pub struct Problem<S> {
    pub name: String,
    /// Dimension of each configuration; sums to `n`.
    pub config_dims: Vec<usize>,
    pub objective: Arc<dyn Function<S>>,
    pub equalities: Vec<ConstraintSpec<S>>,
    pub inequalities: Vec<ConstraintSpec<S>>,
    /// Default starting point.
    pub x_init: Vec<S>,
    pub scene: Option<WaypointSceneSpec>,
}

impl<S> fmt::Debug for Problem<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("config_dims", &self.config_dims)
            .field("equalities", &self.equalities)
            .field("inequalities", &self.inequalities)
            .finish_non_exhaustive()
    }
}

impl<S: Scalar> Problem<S> {
    /// Builds a problem, splitting `constraints` by kind while preserving
    /// their relative order, and validates the structural invariants.
    pub fn new(
        name: impl Into<String>,
        config_dims: Vec<usize>,
        objective: Arc<dyn Function<S>>,
        constraints: Vec<ConstraintSpec<S>>,
        x_init: Vec<S>,
    ) -> Result<Self, ModelError> {
        let (equalities, inequalities) = constraints
            .into_iter()
            .partition(|c| c.kind == ConstraintKind::Equality);
        let p = Self {
            name: name.into(),
            config_dims,
            objective,
            equalities,
            inequalities,
            x_init,
            scene: None,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.config_dims.is_empty() || self.config_dims.contains(&0) {
            return Err(ModelError::InvalidProblem(
                "every configuration needs a positive dimension".into(),
            ));
        }
        if self.x_init.len() != self.n() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n(),
                got: self.x_init.len(),
            });
        }
        let t_count = self.t_count();
        let mut seen = HashSet::new();
        for c in self.constraints() {
            if c.time_indices.is_empty() {
                return Err(ModelError::InvalidProblem(format!(
                    "constraint {} has no time indices",
                    c.instance_id
                )));
            }
            if c.time_indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ModelError::InvalidProblem(format!(
                    "time indices of {} are not strictly sorted",
                    c.instance_id
                )));
            }
            if c.time_indices.iter().any(|&t| t >= t_count) {
                return Err(ModelError::InvalidProblem(format!(
                    "constraint {} touches a configuration outside [0, {t_count})",
                    c.instance_id
                )));
            }
            // Instance ids are the lookup key on the wire, so they must be
            // unique across groups as well.
            if !seen.insert(c.instance_id.as_str()) {
                return Err(ModelError::InvalidProblem(format!(
                    "duplicate constraint instance {}",
                    c.instance_id
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.config_dims.iter().sum()
    }

    pub fn t_count(&self) -> usize {
        self.config_dims.len()
    }

    pub fn constraints(&self) -> impl Iterator<Item = &ConstraintSpec<S>> {
        self.equalities.iter().chain(&self.inequalities)
    }

    pub fn has_second_order(&self) -> bool {
        self.objective.has_hessian() || self.constraints().any(|c| c.func.has_hessian())
    }

    pub fn meta(&self) -> ProblemMeta {
        ProblemMeta {
            name: self.name.clone(),
            n: self.n(),
            t_count: self.t_count(),
            config_dims: self.config_dims.clone(),
            equalities: self.equalities.iter().map(ConstraintSpec::meta).collect(),
            inequalities: self.inequalities.iter().map(ConstraintSpec::meta).collect(),
            scene: self.scene.clone(),
        }
    }

    fn check_dim(&self, x: &[S]) -> Result<(), ModelError> {
        if x.len() == self.n() {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            })
        }
    }

    pub fn eval_objective(&self, x: &[S]) -> Result<(S, Vec<S>), ModelError> {
        self.check_dim(x)?;
        let mut grad = vec![S::zero(); x.len()];
        let v = self.objective.eval(x, &mut grad);
        Ok((v, grad))
    }

    pub fn eval_constraints(&self, x: &[S]) -> Result<ConstraintEval<S>, ModelError> {
        self.check_dim(x)?;
        let eval_all = |cs: &[ConstraintSpec<S>]| -> (Vec<S>, Vec<Vec<S>>) {
            cs.iter()
                .map(|c| {
                    let mut row = vec![S::zero(); x.len()];
                    let v = c.func.eval(x, &mut row);
                    (v, row)
                })
                .unzip()
        };
        let (h, jh) = eval_all(&self.equalities);
        let (g, jg) = eval_all(&self.inequalities);
        Ok(ConstraintEval { h, g, jh, jg })
    }

    /// Constraint values only.
    pub fn constraint_values(&self, x: &[S]) -> Result<(Vec<S>, Vec<S>), ModelError> {
        self.check_dim(x)?;
        let h = self.equalities.iter().map(|c| c.func.value(x)).collect();
        let g = self.inequalities.iter().map(|c| c.func.value(x)).collect();
        Ok((h, g))
    }

    pub fn max_violation(&self, x: &[S]) -> Result<S, ModelError> {
        let (h, g) = self.constraint_values(x)?;
        Ok(violation_of(&h, &g))
    }

    pub fn check_gradients(&self, x: &[S], eps: S) -> Result<GradientReport<S>, ModelError> {
        self.check_dim(x)?;
        let deviation = |f: &dyn Function<S>| {
            let mut grad = vec![S::zero(); x.len()];
            f.eval(x, &mut grad);
            let mut probe = x.to_vec();
            let mut worst = S::zero();
            for i in 0..x.len() {
                probe[i] = x[i] + eps;
                let up = f.value(&probe);
                probe[i] = x[i] - eps;
                let down = f.value(&probe);
                probe[i] = x[i];
                let fd = (up - down) / (eps + eps);
                worst = worst.max((fd - grad[i]).abs());
            }
            worst
        };
        Ok(GradientReport {
            objective: deviation(self.objective.as_ref()),
            equalities: self.equalities.iter().map(|c| deviation(c.func.as_ref())).collect(),
            inequalities: self
                .inequalities
                .iter()
                .map(|c| deviation(c.func.as_ref()))
                .collect(),
        })
    }
}

/// `max(max_i |h_i|, max_j max(0, g_j))`.
pub fn violation_of<S: Scalar>(h: &[S], g: &[S]) -> S {
    let eq = norm_inf(h);
    g.iter().fold(eq, |m, &v| m.max(v.max(S::zero())))
}
