use crate::model::ProblemMeta;
use crate::scalar::Scalar;
use crate::solver::SolverOptions;

use super::TraceError;

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Eval,
    StepsizeShrink,
    XUpdate,
    DualUpdate,
    OuterIter,
    Converged,
    Aborted,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::Eval,
        EventKind::StepsizeShrink,
        EventKind::XUpdate,
        EventKind::DualUpdate,
        EventKind::OuterIter,
        EventKind::Converged,
        EventKind::Aborted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Eval => "eval",
            EventKind::StepsizeShrink => "stepsize-shrink",
            EventKind::XUpdate => "x-update",
            EventKind::DualUpdate => "dual-update",
            EventKind::OuterIter => "outer-iter",
            EventKind::Converged => "converged",
            EventKind::Aborted => "aborted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventPayload<S> {
    /// A point evaluated during the run: `x_init` or a line-search probe.
    Eval {
        x: Vec<S>,
        f: S,
        h: Vec<S>,
        g: Vec<S>,
        loss: S,
        grad_norm: S,
        /// Step size of the probe; zero for the initial point.
        alpha: S,
    },
    StepsizeShrink { alpha_old: S, alpha_new: S },
    XUpdate { x: Vec<S> },
    DualUpdate { kappa: Vec<S>, lambda: Vec<S>, mu: S },
    OuterIter { counter: u64 },
    Converged { max_violation: S, kkt_residual: S },
    Aborted { reason: String },
}

impl<S> EventPayload<S> {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::Eval { .. } => EventKind::Eval,
            EventPayload::StepsizeShrink { .. } => EventKind::StepsizeShrink,
            EventPayload::XUpdate { .. } => EventKind::XUpdate,
            EventPayload::DualUpdate { .. } => EventKind::DualUpdate,
            EventPayload::OuterIter { .. } => EventKind::OuterIter,
            EventPayload::Converged { .. } => EventKind::Converged,
            EventPayload::Aborted { .. } => EventKind::Aborted,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent<S> {
    pub seq: u64,
    pub payload: EventPayload<S>,
}

impl<S> LogEvent<S> {
    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader<S> {
    pub format_version: u32,
    pub problem: ProblemMeta,
    pub options: SolverOptions,
    pub x_init: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<S> {
    pub header: TraceHeader<S>,
    pub events: Vec<LogEvent<S>>,
}

impl<S: Scalar> Trace<S> {
    pub fn new(problem: ProblemMeta, options: SolverOptions, x_init: Vec<S>) -> Self {
        Self {
            header: TraceHeader {
                format_version: TRACE_FORMAT_VERSION,
                problem,
                options,
                x_init,
            },
            events: Vec::new(),
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64
    }

    /// Appends an event whose `seq` must continue the gapless sequence.
    pub fn append_event(&mut self, event: LogEvent<S>) -> Result<(), TraceError> {
        let expected = self.next_seq();
        if event.seq != expected {
            return Err(TraceError::OutOfOrder {
                expected,
                got: event.seq,
            });
        }
        self.events.push(event);
        Ok(())
    }

    /// Appends `payload` with the next sequence number.
    pub fn record(&mut self, payload: EventPayload<S>) {
        let seq = self.next_seq();
        self.events.push(LogEvent { seq, payload });
    }

    /// Index of the event carrying the final point (the last eval).
    pub fn final_index(&self) -> Option<usize> {
        self.events.iter().rposition(|e| e.kind() == EventKind::Eval)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind() == kind).count()
    }
}
