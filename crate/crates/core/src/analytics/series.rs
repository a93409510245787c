use serde::Serialize;

use super::AnalyticsError;
use crate::model::ConstraintKind;
use crate::scalar::{norm2, sub, Scalar};
use crate::trace::{group_tree, EventPayload, SeriesPoint, Trace, Trajectory};

/// NaN-propagating max of absolute values.
fn abs_max<S: Scalar>(acc: S, v: S) -> S {
    if acc.is_nan() || v.is_nan() {
        S::nan()
    } else {
        acc.max(v.abs())
    }
}

/// Instance id, time indices, kind and index within its kind.
type Member = (String, Vec<usize>, ConstraintKind, usize);

fn members<S: Scalar>(trace: &Trace<S>, group: &str) -> Result<Vec<Member>, AnalyticsError> {
    let meta = &trace.header.problem;
    let node = group_tree(meta)
        .into_iter()
        .find(|g| g.name == group)
        .ok_or_else(|| AnalyticsError::UnknownGroup(group.to_string()))?;
    Ok(node
        .instances
        .into_iter()
        .map(|c| {
            let (kind, idx) = meta
                .constraint_index(&c.instance_id)
                .expect("group members come from the same header");
            (c.instance_id, c.time_indices, kind, idx)
        })
        .collect())
}

fn per_eval<S: Scalar, T>(trace: &Trace<S>, mut f: impl FnMut(&[S], &[S]) -> T) -> Vec<T> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::Eval { h, g, .. } => Some(f(h, g)),
            _ => None,
        })
        .collect()
}

/// Per step, the largest absolute value over the members of `group`.
/// Both kinds aggregate by absolute value.
pub fn aggregate_group_series<S: Scalar>(trace: &Trace<S>, group: &str) -> Result<Vec<SeriesPoint<S>>, AnalyticsError> {
    let members = members(trace, group)?;
    let values = per_eval(trace, |h, g| {
        members.iter().fold(S::zero(), |acc, (_, _, kind, idx)| {
            let v = match kind {
                ConstraintKind::Equality => h[*idx],
                ConstraintKind::Inequality => g[*idx],
            };
            abs_max(acc, v)
        })
    });
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(step, value)| SeriesPoint { step, value })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct MemberSeries<S: Scalar> {
    pub instance_id: String,
    pub time_indices: Vec<usize>,
    pub points: Vec<SeriesPoint<S>>,
}

/// Unaggregated series of every member of `group`, in group-tree order.
pub fn group_member_series<S: Scalar>(trace: &Trace<S>, group: &str) -> Result<Vec<MemberSeries<S>>, AnalyticsError> {
    let members = members(trace, group)?;
    let mut out: Vec<MemberSeries<S>> = members
        .iter()
        .map(|(id, times, _, _)| MemberSeries {
            instance_id: id.clone(),
            time_indices: times.clone(),
            points: Vec::new(),
        })
        .collect();
    let mut step = 0;
    per_eval(trace, |h, g| {
        for (series, (_, _, kind, idx)) in out.iter_mut().zip(&members) {
            let value = match kind {
                ConstraintKind::Equality => h[*idx],
                ConstraintKind::Inequality => g[*idx],
            };
            series.points.push(SeriesPoint { step, value });
        }
        step += 1;
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct Progression<S: Scalar> {
    pub points: Vec<SeriesPoint<S>>,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub total_distance: S,
    /// Set when the trajectory never moves (or its length is not finite);
    /// `points` are then all zero.
    pub degenerate: bool,
}

/// Remaining path length from each step to the end of the trajectory,
/// normalized by the total length.
pub fn progression_remaining<S: Scalar>(trajectory: &Trajectory<S>) -> Progression<S> {
    let pts = &trajectory.points;
    let mut remaining = vec![S::zero(); pts.len()];
    for k in (0..pts.len().saturating_sub(1)).rev() {
        remaining[k] = remaining[k + 1] + norm2(&sub(&pts[k + 1], &pts[k]));
    }
    let total = remaining.first().copied().unwrap_or_else(S::zero);
    let degenerate = !(total.is_finite() && total > S::zero());
    let points = remaining
        .into_iter()
        .enumerate()
        .map(|(step, r)| SeriesPoint {
            step,
            value: if degenerate { S::zero() } else { r / total },
        })
        .collect();
    Progression {
        points,
        total_distance: total,
        degenerate,
    }
}
