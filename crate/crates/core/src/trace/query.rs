use std::collections::BTreeMap;

use serde::Serialize;

use super::event::{EventPayload, Trace};
use super::TraceError;
use crate::model::{ConstraintKind, ConstraintMeta, ProblemMeta};
use crate::scalar::Scalar;
use crate::solver::DualState;

/// Position `i` in the optimization trajectory plus the seq of the eval
/// event it was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StepIndex {
    pub i: usize,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct SeriesPoint<S: Scalar> {
    pub step: usize,
    #[serde(serialize_with = "super::wire::scalar::serialize")]
    pub value: S,
}

/// Every point probed during a run, in order: `x_init`, then each line
/// search probe, ending at the final point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub steps: Vec<StepIndex>,
    pub points: Vec<Vec<S>>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> &[S] {
        self.points.last().expect("trajectories are nonempty")
    }

    pub fn point(&self, step: usize) -> Result<&[S], TraceError> {
        self.points
            .get(step)
            .map(Vec::as_slice)
            .ok_or(TraceError::StepOutOfRange {
                step,
                len: self.points.len(),
            })
    }
}

pub fn optimization_trajectory<S: Scalar>(trace: &Trace<S>) -> Result<Trajectory<S>, TraceError> {
    let mut steps = Vec::new();
    let mut points = Vec::new();
    for e in &trace.events {
        if let EventPayload::Eval { x, .. } = &e.payload {
            steps.push(StepIndex {
                i: points.len(),
                seq: e.seq,
            });
            points.push(x.clone());
        }
    }
    if points.is_empty() {
        return Err(TraceError::EmptyTrajectory);
    }
    Ok(Trajectory { steps, points })
}

/// Trajectory positions of the points the solver actually moved to: the
/// initial point, every probe accepted by an x-update, and the final point.
pub fn accepted_steps<S: Scalar>(trace: &Trace<S>) -> Vec<usize> {
    let mut evals = 0usize;
    let mut out = Vec::new();
    for e in &trace.events {
        match &e.payload {
            EventPayload::Eval { .. } => {
                evals += 1;
                if evals == 1 {
                    out.push(0);
                }
            }
            EventPayload::XUpdate { .. } if evals > 0 && out.last() != Some(&(evals - 1)) => {
                out.push(evals - 1);
            }
            _ => {}
        }
    }
    if evals > 0 && out.last() != Some(&(evals - 1)) {
        out.push(evals - 1);
    }
    out
}

/// Per-step values of one constraint, read from the eval payloads.
pub fn constraint_series<S: Scalar>(
    trace: &Trace<S>,
    instance_id: &str,
) -> Result<Vec<SeriesPoint<S>>, TraceError> {
    let (kind, index) = trace
        .header
        .problem
        .constraint_index(instance_id)
        .ok_or_else(|| TraceError::UnknownInstance(instance_id.to_string()))?;
    let series = trace
        .events
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::Eval { h, g, .. } => Some(match kind {
                ConstraintKind::Equality => h[index],
                ConstraintKind::Inequality => g[index],
            }),
            _ => None,
        })
        .enumerate()
        .map(|(step, value)| SeriesPoint { step, value })
        .collect();
    Ok(series)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupNode {
    pub name: String,
    pub kind: ConstraintKind,
    pub instances: Vec<ConstraintMeta>,
}

/// Constraint groups in lexicographic order; members ordered by time
/// indices, then instance id.
pub fn group_tree(meta: &ProblemMeta) -> Vec<GroupNode> {
    let mut groups: BTreeMap<&str, Vec<&ConstraintMeta>> = BTreeMap::new();
    for c in meta.equalities.iter().chain(&meta.inequalities) {
        groups.entry(c.group.as_str()).or_default().push(c);
    }
    groups
        .into_iter()
        .map(|(name, mut members)| {
            members.sort_by(|a, b| {
                a.time_indices
                    .cmp(&b.time_indices)
                    .then_with(|| a.instance_id.cmp(&b.instance_id))
            });
            GroupNode {
                name: name.to_string(),
                kind: members[0].kind,
                instances: members.into_iter().cloned().collect(),
            }
        })
        .collect()
}

/// Dual variables in effect when trajectory step `step` was evaluated: the
/// nearest preceding dual update, or the initial zero multipliers.
pub fn duals_at_step<S: Scalar>(trace: &Trace<S>, step: usize) -> Result<DualState<S>, TraceError> {
    let traj_len = trace
        .events
        .iter()
        .filter(|e| matches!(e.payload, EventPayload::Eval { .. }))
        .count();
    let mut evals = 0usize;
    let mut duals = DualState::initial(
        trace.header.problem.equalities.len(),
        trace.header.problem.inequalities.len(),
    );
    for e in &trace.events {
        match &e.payload {
            EventPayload::Eval { .. } => {
                if evals == step {
                    return Ok(duals);
                }
                evals += 1;
            }
            EventPayload::DualUpdate { kappa, lambda, mu } => {
                duals = DualState {
                    kappa: kappa.clone(),
                    lambda: lambda.clone(),
                    mu: *mu,
                };
            }
            _ => {}
        }
    }
    Err(TraceError::StepOutOfRange { step, len: traj_len })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverOptions;
    use crate::suite;

    fn eval(x: f64, h: f64) -> EventPayload<f64> {
        EventPayload::Eval {
            x: vec![x, 0.0],
            f: x * x,
            h: vec![h],
            g: vec![],
            loss: 0.0,
            grad_norm: 0.0,
            alpha: 1.0,
        }
    }

    fn toy_trace() -> Trace<f64> {
        let p = suite::make_toy_equality::<f64>();
        let mut t = Trace::new(p.meta(), SolverOptions::default(), vec![0.0, 0.0]);
        t.record(EventPayload::OuterIter { counter: 0 });
        t.record(eval(0.0, -1.0));
        t.record(eval(2.0, 1.0));
        t.record(EventPayload::StepsizeShrink { alpha_old: 1.0, alpha_new: 0.5 });
        t.record(eval(1.0, 0.0));
        t.record(EventPayload::XUpdate { x: vec![1.0, 0.0] });
        t.record(EventPayload::DualUpdate { kappa: vec![0.5], lambda: vec![], mu: 1.0 });
        t.record(eval(0.5, -0.5));
        t
    }

    #[test]
    fn trajectory_counts_rejected_probes() {
        let t = toy_trace();
        let s = optimization_trajectory(&t).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.steps[1], StepIndex { i: 1, seq: 2 });
        assert_eq!(s.last(), &[0.5, 0.0]);
        assert_eq!(accepted_steps(&t), vec![0, 2, 3]);
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        let p = suite::make_toy_equality::<f64>();
        let t = Trace::<f64>::new(p.meta(), SolverOptions::default(), vec![0.0, 0.0]);
        assert!(matches!(optimization_trajectory(&t), Err(TraceError::EmptyTrajectory)));
    }

    #[test]
    fn series_aligns_with_trajectory() {
        let t = toy_trace();
        let s = constraint_series(&t, "sum/0").unwrap();
        assert_eq!(s.len(), optimization_trajectory(&t).unwrap().len());
        assert_eq!(s[2], SeriesPoint { step: 2, value: 0.0 });
        assert!(matches!(
            constraint_series(&t, "nope"),
            Err(TraceError::UnknownInstance(_))
        ));
    }

    #[test]
    fn duals_follow_updates() {
        let t = toy_trace();
        assert_eq!(duals_at_step(&t, 2).unwrap().kappa, vec![0.0]);
        assert_eq!(duals_at_step(&t, 3).unwrap().kappa, vec![0.5]);
        assert!(duals_at_step(&t, 4).is_err());
    }

    #[test]
    fn group_tree_ordering() {
        let p = suite::get_problem::<f64>("waypoint_T20_attach").unwrap();
        let tree = group_tree(&p.meta());
        let names: Vec<_> = tree.iter().map(|g| g.name.as_str()).collect();
        assert_eq!(names, ["attach", "endpoint", "obstacle_0"]);
        assert_eq!(tree[2].instances.len(), 20);
        assert_eq!(tree[2].instances[3].time_indices, vec![3]);
        // start pins (t=0) sort before goal pins (t=19)
        assert_eq!(tree[1].instances[0].instance_id, "endpoint/start/0");

        let toy = group_tree(&suite::make_toy_equality::<f64>().meta());
        assert_eq!(toy.len(), 1);
        assert_eq!(toy[0].instances.len(), 1);
    }
}
