//! Constrained nonlinear optimization with a fully recorded trace, and the
//! analytics that turn such a trace into inspectable views: aggregated
//! constraint series, progression speed, PCA time curves and loss
//! landscape slices.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

// Negated comparisons are deliberate: they treat NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod solver;
pub mod suite;
pub mod trace;

pub use scalar::Scalar;

pub type Problem = model::Problem<f64>;
pub type DualState = solver::DualState<f64>;
pub type SolveResult = solver::SolveResult<f64>;
pub type Trace = trace::Trace<f64>;
pub type LogEvent = trace::LogEvent<f64>;
pub type Trajectory = trace::Trajectory<f64>;
pub type SeriesPoint = trace::SeriesPoint<f64>;
pub type PlaneSpec = analytics::PlaneSpec<f64>;
pub type GridField = analytics::GridField<f64>;
pub type ProjectionSet = analytics::ProjectionSet<f64>;

pub type Problem32 = model::Problem<f32>;
pub type Trace32 = trace::Trace<f32>;
