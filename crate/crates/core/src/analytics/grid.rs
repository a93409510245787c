use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::plane::{PlaneSpec, Window};
use super::AnalyticsError;
use crate::model::{ConstraintKind, Problem};
use crate::scalar::Scalar;
use crate::solver::{loss_value, DualState};

/// A function that can be sampled over a plane. Wire names are `f`, `L`,
/// `h:<instance>` and `g:<instance>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FunctionKey {
    Objective,
    Loss,
    Equality(String),
    Inequality(String),
}

impl FunctionKey {
    /// Parses a wire name against the problem's constraints. A bare
    /// instance id is accepted and resolved to its kind.
    pub fn parse<S: Scalar>(name: &str, problem: &Problem<S>) -> Result<Self, AnalyticsError> {
        let unknown = || AnalyticsError::UnknownFunction(name.to_string());
        let find = |id: &str, kind: ConstraintKind| {
            let list = match kind {
                ConstraintKind::Equality => &problem.equalities,
                ConstraintKind::Inequality => &problem.inequalities,
            };
            list.iter().any(|c| c.instance_id == id)
        };
        match name {
            "f" => Ok(Self::Objective),
            "L" => Ok(Self::Loss),
            _ => {
                if let Some(id) = name.strip_prefix("h:") {
                    find(id, ConstraintKind::Equality).then(|| Self::Equality(id.into())).ok_or_else(unknown)
                } else if let Some(id) = name.strip_prefix("g:") {
                    find(id, ConstraintKind::Inequality).then(|| Self::Inequality(id.into())).ok_or_else(unknown)
                } else if find(name, ConstraintKind::Equality) {
                    Ok(Self::Equality(name.into()))
                } else if find(name, ConstraintKind::Inequality) {
                    Ok(Self::Inequality(name.into()))
                } else {
                    Err(unknown())
                }
            }
        }
    }

    pub fn constraint_kind(&self) -> Option<ConstraintKind> {
        match self {
            Self::Equality(_) => Some(ConstraintKind::Equality),
            Self::Inequality(_) => Some(ConstraintKind::Inequality),
            _ => None,
        }
    }
}

impl fmt::Display for FunctionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Objective => f.write_str("f"),
            Self::Loss => f.write_str("L"),
            Self::Equality(id) => write!(f, "h:{id}"),
            Self::Inequality(id) => write!(f, "g:{id}"),
        }
    }
}

impl Serialize for FunctionKey {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.collect_str(self)
    }
}

/// Node layout of a sampled window: row `r` sits at `t_min + r·dt`,
/// column `c` at `s_min + c·ds`. Values are stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct GridLayout<S: Scalar> {
    pub rows: usize,
    pub cols: usize,
    pub window: Window<S>,
}

impl<S: Scalar> GridLayout<S> {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn s_at(&self, c: usize) -> S {
        let w = &self.window;
        if c + 1 == self.cols {
            return w.s_max;
        }
        w.s_min + (w.s_max - w.s_min) * S::from_usize(c).unwrap() / S::from_usize(self.cols - 1).unwrap()
    }

    pub fn t_at(&self, r: usize) -> S {
        let w = &self.window;
        if r + 1 == self.rows {
            return w.t_max;
        }
        w.t_min + (w.t_max - w.t_min) * S::from_usize(r).unwrap() / S::from_usize(self.rows - 1).unwrap()
    }

    /// Plane coordinates of node `(r, c)`.
    pub fn node(&self, r: usize, c: usize) -> (S, S) {
        (self.s_at(c), self.t_at(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct FieldValues<S: Scalar> {
    pub function: FunctionKey,
    #[serde(serialize_with = "crate::trace::wire::scalar_vec::serialize")]
    pub values: Vec<S>,
    /// Row-major indices of nodes whose value is NaN or infinite.
    pub non_finite: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct GridField<S: Scalar> {
    pub plane: PlaneSpec<S>,
    pub rows: usize,
    pub cols: usize,
    pub fields: Vec<FieldValues<S>>,
    pub duals_used: DualState<S>,
}

impl<S: Scalar> GridField<S> {
    pub fn layout(&self) -> GridLayout<S> {
        GridLayout {
            rows: self.rows,
            cols: self.cols,
            window: self.plane.window,
        }
    }

    pub fn field(&self, key: &FunctionKey) -> Option<&FieldValues<S>> {
        self.fields.iter().find(|f| &f.function == key)
    }
}

enum Source {
    Objective,
    Loss,
    Equality(usize),
    Inequality(usize),
}

/// Evaluates `functions` at every node of the plane's window. Cells are
/// independent and computed in parallel; the result does not depend on
/// scheduling.
pub fn sample_grid<S: Scalar>(
    problem: &Problem<S>,
    plane: &PlaneSpec<S>,
    rows: usize,
    cols: usize,
    functions: &[FunctionKey],
    duals: &DualState<S>,
) -> Result<GridField<S>, AnalyticsError> {
    if rows < 2 || cols < 2 {
        return Err(AnalyticsError::InvalidArgument(format!("resolution {rows}x{cols} is below 2x2")));
    }
    if functions.is_empty() {
        return Err(AnalyticsError::InvalidArgument("no functions requested".into()));
    }
    if plane.dim() != problem.n() || plane.u.len() != problem.n() || plane.v.len() != problem.n() {
        return Err(AnalyticsError::InvalidArgument(format!(
            "plane lives in dimension {}, problem in {}",
            plane.dim(),
            problem.n()
        )));
    }
    if duals.kappa.len() != problem.equalities.len() || duals.lambda.len() != problem.inequalities.len() {
        return Err(AnalyticsError::InvalidArgument("dual state does not match the problem".into()));
    }
    if !plane.window.is_valid() {
        return Err(AnalyticsError::InvalidArgument("empty sampling window".into()));
    }
    let sources: Vec<Source> = functions
        .iter()
        .map(|k| {
            let missing = || AnalyticsError::UnknownFunction(k.to_string());
            Ok(match k {
                FunctionKey::Objective => Source::Objective,
                FunctionKey::Loss => Source::Loss,
                FunctionKey::Equality(id) => {
                    Source::Equality(problem.equalities.iter().position(|c| &c.instance_id == id).ok_or_else(missing)?)
                }
                FunctionKey::Inequality(id) => {
                    Source::Inequality(problem.inequalities.iter().position(|c| &c.instance_id == id).ok_or_else(missing)?)
                }
            })
        })
        .collect::<Result<_, AnalyticsError>>()?;
    let need_all = sources.iter().any(|s| matches!(s, Source::Loss));

    let layout = GridLayout {
        rows,
        cols,
        window: plane.window,
    };
    let cells: Vec<Vec<S>> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (s, t) = layout.node(i / cols, i % cols);
            let x = plane.point_at(s, t);
            let mut f = None;
            let mut all: Option<(Vec<S>, Vec<S>)> = None;
            if need_all {
                let h = problem.equalities.iter().map(|c| c.func.value(&x)).collect();
                let g = problem.inequalities.iter().map(|c| c.func.value(&x)).collect();
                all = Some((h, g));
            }
            let mut objective = || *f.get_or_insert_with(|| problem.objective.value(&x));
            sources
                .iter()
                .map(|src| match src {
                    Source::Objective => objective(),
                    Source::Loss => {
                        let (h, g) = all.as_ref().expect("computed above");
                        loss_value(objective(), h, g, duals)
                    }
                    Source::Equality(j) => match &all {
                        Some((h, _)) => h[*j],
                        None => problem.equalities[*j].func.value(&x),
                    },
                    Source::Inequality(j) => match &all {
                        Some((_, g)) => g[*j],
                        None => problem.inequalities[*j].func.value(&x),
                    },
                })
                .collect()
        })
        .collect();

    let fields = functions
        .iter()
        .enumerate()
        .map(|(k, key)| {
            let values: Vec<S> = cells.iter().map(|c| c[k]).collect();
            let non_finite = values
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_finite())
                .map(|(i, _)| i)
                .collect();
            FieldValues {
                function: key.clone(),
                values,
                non_finite,
            }
        })
        .collect();
    Ok(GridField {
        plane: plane.clone(),
        rows,
        cols,
        fields,
        duals_used: duals.clone(),
    })
}
