//! Optimization trace: the event log of one solver run, its line-delimited
//! file format, and the queries that rebuild the trajectory and per-step
//! constraint series from it.

mod event;
mod io;
mod query;
pub mod wire;

pub use event::{EventKind, EventPayload, LogEvent, Trace, TraceHeader, TRACE_FORMAT_VERSION};
pub use io::{event_to_json, read_trace, read_trace_file, write_trace, write_trace_file};
pub use query::{
    accepted_steps, constraint_series, duals_at_step, group_tree, optimization_trajectory,
    GroupNode, SeriesPoint, StepIndex, Trajectory,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("event out of order: expected seq {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported trace format version {0}")]
    UnsupportedVersion(u32),
    #[error("trace contains no evaluations")]
    EmptyTrajectory,
    #[error("unknown constraint instance `{0}`")]
    UnknownInstance(String),
    #[error("step {step} out of range (trajectory has {len} steps)")]
    StepOutOfRange { step: usize, len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
