//! Line-delimited JSON trace files: a header record on line 1, then one
//! event per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::event::{EventPayload, LogEvent, Trace, TraceHeader, TRACE_FORMAT_VERSION};
use super::wire::{real, real_vec};
use super::TraceError;
use crate::model::ProblemMeta;
use crate::scalar::Scalar;
use crate::solver::SolverOptions;

#[derive(Serialize, Deserialize)]
struct WireHeader {
    format_version: u32,
    problem: ProblemMeta,
    options: SolverOptions,
    #[serde(with = "real_vec")]
    x_init: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WireEvent {
    seq: u64,
    #[serde(flatten)]
    payload: WirePayload,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum WirePayload {
    Eval {
        #[serde(with = "real_vec")]
        x: Vec<f64>,
        #[serde(with = "real")]
        f: f64,
        #[serde(with = "real_vec")]
        h: Vec<f64>,
        #[serde(with = "real_vec")]
        g: Vec<f64>,
        #[serde(rename = "L", with = "real")]
        loss: f64,
        #[serde(with = "real")]
        grad_norm: f64,
        #[serde(with = "real")]
        alpha: f64,
    },
    StepsizeShrink {
        #[serde(with = "real")]
        alpha_old: f64,
        #[serde(with = "real")]
        alpha_new: f64,
    },
    XUpdate {
        #[serde(with = "real_vec")]
        x: Vec<f64>,
    },
    DualUpdate {
        #[serde(with = "real_vec")]
        kappa: Vec<f64>,
        #[serde(with = "real_vec")]
        lambda: Vec<f64>,
        #[serde(with = "real")]
        mu: f64,
    },
    OuterIter {
        counter: u64,
    },
    Converged {
        #[serde(with = "real")]
        max_violation: f64,
        #[serde(with = "real")]
        kkt_residual: f64,
    },
    Aborted {
        reason: String,
    },
}

fn widen<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossless()).collect()
}

fn narrow<S: Scalar>(v: Vec<f64>) -> Vec<S> {
    v.into_iter().map(S::from_f64_wire).collect()
}

impl WirePayload {
    fn from_payload<S: Scalar>(p: &EventPayload<S>) -> Self {
        match p {
            EventPayload::Eval { x, f, h, g, loss, grad_norm, alpha } => WirePayload::Eval {
                x: widen(x),
                f: f.to_f64_lossless(),
                h: widen(h),
                g: widen(g),
                loss: loss.to_f64_lossless(),
                grad_norm: grad_norm.to_f64_lossless(),
                alpha: alpha.to_f64_lossless(),
            },
            EventPayload::StepsizeShrink { alpha_old, alpha_new } => WirePayload::StepsizeShrink {
                alpha_old: alpha_old.to_f64_lossless(),
                alpha_new: alpha_new.to_f64_lossless(),
            },
            EventPayload::XUpdate { x } => WirePayload::XUpdate { x: widen(x) },
            EventPayload::DualUpdate { kappa, lambda, mu } => WirePayload::DualUpdate {
                kappa: widen(kappa),
                lambda: widen(lambda),
                mu: mu.to_f64_lossless(),
            },
            EventPayload::OuterIter { counter } => WirePayload::OuterIter { counter: *counter },
            EventPayload::Converged { max_violation, kkt_residual } => WirePayload::Converged {
                max_violation: max_violation.to_f64_lossless(),
                kkt_residual: kkt_residual.to_f64_lossless(),
            },
            EventPayload::Aborted { reason } => WirePayload::Aborted { reason: reason.clone() },
        }
    }

    fn into_payload<S: Scalar>(self) -> EventPayload<S> {
        let s = S::from_f64_wire;
        match self {
            WirePayload::Eval { x, f, h, g, loss, grad_norm, alpha } => EventPayload::Eval {
                x: narrow(x),
                f: s(f),
                h: narrow(h),
                g: narrow(g),
                loss: s(loss),
                grad_norm: s(grad_norm),
                alpha: s(alpha),
            },
            WirePayload::StepsizeShrink { alpha_old, alpha_new } => EventPayload::StepsizeShrink {
                alpha_old: s(alpha_old),
                alpha_new: s(alpha_new),
            },
            WirePayload::XUpdate { x } => EventPayload::XUpdate { x: narrow(x) },
            WirePayload::DualUpdate { kappa, lambda, mu } => EventPayload::DualUpdate {
                kappa: narrow(kappa),
                lambda: narrow(lambda),
                mu: s(mu),
            },
            WirePayload::OuterIter { counter } => EventPayload::OuterIter { counter },
            WirePayload::Converged { max_violation, kkt_residual } => EventPayload::Converged {
                max_violation: s(max_violation),
                kkt_residual: s(kkt_residual),
            },
            WirePayload::Aborted { reason } => EventPayload::Aborted { reason },
        }
    }
}

/// Serializes one event exactly as it appears in a trace file.
pub fn event_to_json<S: Scalar>(e: &LogEvent<S>) -> String {
    serde_json::to_string(&WireEvent {
        seq: e.seq,
        payload: WirePayload::from_payload(&e.payload),
    })
    .expect("events always serialize")
}

pub fn write_trace<S: Scalar, W: Write>(trace: &Trace<S>, mut sink: W) -> Result<(), TraceError> {
    let header = WireHeader {
        format_version: trace.header.format_version,
        problem: trace.header.problem.clone(),
        options: trace.header.options.clone(),
        x_init: widen(&trace.header.x_init),
    };
    serde_json::to_writer(&mut sink, &header).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    for e in &trace.events {
        sink.write_all(event_to_json(e).as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_trace<S: Scalar, R: BufRead>(source: R) -> Result<Trace<S>, TraceError> {
    let mut lines = source.lines().enumerate();
    let header_line = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(TraceError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let parse_err = |line: usize, e: serde_json::Error| TraceError::Parse {
        line,
        message: e.to_string(),
    };
    let raw: serde_json::Value = serde_json::from_str(&header_line).map_err(|e| parse_err(1, e))?;
    match raw.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == TRACE_FORMAT_VERSION as u64 => {}
        Some(v) => return Err(TraceError::UnsupportedVersion(v as u32)),
        None => {
            return Err(TraceError::Parse {
                line: 1,
                message: "header lacks format_version".into(),
            })
        }
    }
    let header: WireHeader = serde_json::from_str(&header_line).map_err(|e| parse_err(1, e))?;
    let mut trace = Trace {
        header: TraceHeader {
            format_version: header.format_version,
            problem: header.problem,
            options: header.options,
            x_init: narrow(header.x_init),
        },
        events: Vec::new(),
    };
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireEvent = serde_json::from_str(&line).map_err(|e| parse_err(line_no, e))?;
        trace
            .append_event(LogEvent {
                seq: wire.seq,
                payload: wire.payload.into_payload(),
            })
            .map_err(|e| TraceError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
    }
    Ok(trace)
}

pub fn write_trace_file<S: Scalar>(trace: &Trace<S>, path: impl AsRef<Path>) -> Result<(), TraceError> {
    write_trace(trace, BufWriter::new(File::create(path)?))
}

pub fn read_trace_file<S: Scalar>(path: impl AsRef<Path>) -> Result<Trace<S>, TraceError> {
    read_trace(BufReader::new(File::open(path)?))
}
