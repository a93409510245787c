use serde::Serialize;

use super::pca::{pca_basis, PcaBasis};
use super::AnalyticsError;
use crate::scalar::Scalar;
use crate::trace::{accepted_steps, optimization_trajectory, Trace, TraceError};

/// One intermediate solution drawn as a path through configuration space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPolyline<S: Scalar> {
    pub step: usize,
    /// Projected configurations, index = time `t`.
    pub points: Vec<[S; 2]>,
}

/// One configuration followed across the selected steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigTrajectory<S: Scalar> {
    pub config: usize,
    /// Projected configuration, one per selected step in order.
    pub points: Vec<[S; 2]>,
}

/// Which steps the shared basis was fitted on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Subsample {
    /// `"accepted-updates"`: the initial point, every accepted line search
    /// probe and the final point.
    pub rule: &'static str,
    pub steps: Vec<usize>,
}

/// Time-curve view: paths and per-configuration trajectories, all drawn
/// with one PCA basis so curves are comparable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSet<S: Scalar> {
    pub config_dim: usize,
    pub basis: PcaBasis<S>,
    pub subsample: Subsample,
    pub steps: Vec<usize>,
    pub configs: Vec<usize>,
    pub paths: Vec<PathPolyline<S>>,
    pub trajectories: Vec<ConfigTrajectory<S>>,
}

/// Projects configurations of the run onto the top two principal axes of
/// the pooled configurations of the accepted steps.
///
/// `steps` defaults to the accepted subsample, `configs` to every time
/// index. Trajectories run over the selected steps.
pub fn path_evolution_projection<S: Scalar>(
    trace: &Trace<S>,
    steps: Option<&[usize]>,
    configs: Option<&[usize]>,
) -> Result<ProjectionSet<S>, AnalyticsError> {
    let meta = &trace.header.problem;
    let d = meta.uniform_config_dim().ok_or_else(|| {
        AnalyticsError::UnsupportedProjection("configurations differ in dimension and cannot share a basis".into())
    })?;
    let t_count = meta.t_count;
    let traj = optimization_trajectory(trace)?;
    let fit_steps = accepted_steps(trace);
    let steps: Vec<usize> = steps.map(<[usize]>::to_vec).unwrap_or_else(|| fit_steps.clone());
    if let Some(&bad) = steps.iter().find(|&&s| s >= traj.len()) {
        return Err(TraceError::StepOutOfRange { step: bad, len: traj.len() }.into());
    }
    let configs: Vec<usize> = configs.map(<[usize]>::to_vec).unwrap_or_else(|| (0..t_count).collect());
    if let Some(&bad) = configs.iter().find(|&&t| t >= t_count) {
        return Err(AnalyticsError::InvalidArgument(format!("configuration {bad} out of range (T = {t_count})")));
    }

    let config = |step: usize, t: usize| &traj.points[step][t * d..(t + 1) * d];
    let pooled: Vec<Vec<S>> = fit_steps
        .iter()
        .flat_map(|&i| (0..t_count).map(move |t| (i, t)))
        .map(|(i, t)| config(i, t).to_vec())
        .collect();
    let basis = pca_basis(&pooled, d.min(2))?;
    let project = |c: &[S]| -> [S; 2] {
        let p = basis.project(c);
        [p[0], p.get(1).copied().unwrap_or_else(S::zero)]
    };

    let paths = steps
        .iter()
        .map(|&i| PathPolyline {
            step: i,
            points: (0..t_count).map(|t| project(config(i, t))).collect(),
        })
        .collect();
    let trajectories = configs
        .iter()
        .map(|&t| ConfigTrajectory {
            config: t,
            points: steps.iter().map(|&i| project(config(i, t))).collect(),
        })
        .collect();
    Ok(ProjectionSet {
        config_dim: d,
        basis,
        subsample: Subsample {
            rule: "accepted-updates",
            steps: fit_steps,
        },
        steps,
        configs,
        paths,
        trajectories,
    })
}
