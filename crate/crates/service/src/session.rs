use nlpscope_core::suite::{problem_from_meta, SuiteError};
use nlpscope_core::trace::{optimization_trajectory, TraceError};
use nlpscope_core::{Problem, Trace, Trajectory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("cannot re-create the traced problem: {0}")]
    Problem(#[from] SuiteError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// A loaded trace with the problem it was recorded on. Immutable once
/// built; replacing the session swaps the whole value.
pub struct Session {
    pub trace: Trace,
    pub problem: Problem,
    pub trajectory: Trajectory,
}

impl Session {
    pub fn new(trace: Trace) -> Result<Self, SessionError> {
        let problem = problem_from_meta(&trace.header.problem)?;
        let trajectory = optimization_trajectory(&trace)?;
        Ok(Self { trace, problem, trajectory })
    }
}
