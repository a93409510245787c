//! Derived views over a recorded run: aggregated constraint series,
//! progression speed, PCA time curves, and loss landscape slices with
//! isobands and feasibility masks.
//!
//! Everything here is a pure function of its inputs.

mod grid;
mod isoband;
mod pca;
mod plane;
mod projection;
mod series;

use thiserror::Error;

use crate::model::ModelError;
use crate::trace::TraceError;

pub use grid::{sample_grid, FieldValues, FunctionKey, GridField, GridLayout};
pub use isoband::{
    feasibility_mask, isobands, polygon_area, quantile_levels, Band, FeasibilityMask, Isobands,
    Polygon, DEFAULT_LEVEL_COUNT,
};
pub use pca::{pca_basis, PcaBasis};
pub use plane::{
    default_plane, median_sigma, project_to_plane, project_trajectory, thickness, three_point_plane,
    PlaneCoords, PlaneSpec, ProjectedStep, ThicknessRange, Window, WINDOW_MARGIN,
};
pub use projection::{path_evolution_projection, ConfigTrajectory, PathPolyline, ProjectionSet, Subsample};
pub use series::{aggregate_group_series, group_member_series, progression_remaining, MemberSeries, Progression};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("unknown constraint group `{0}`")]
    UnknownGroup(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("degenerate plane: {0}")]
    DegeneratePlane(String),
    #[error("unsupported projection: {0}")]
    UnsupportedProjection(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
