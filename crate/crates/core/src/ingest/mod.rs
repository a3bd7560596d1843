//! Reading external traces into a [`TraceSet`](crate::trace_model::TraceSet).
//!
//! Two carriers are supported: IEEE 1364 value-change dumps and CSV logs of
//! function enter/exit events.

mod eventlog;
mod vcd;

pub use eventlog::{functions_to_traces, parse_eventlog, EventKind, EventLog, EventRecord};
pub use vcd::{
    densify, parse_vcd, write_vcd, Binarize, DensifyOptions, Logic, ScopeNode, VcdChange, VcdDocument, VcdValue, VcdVar,
};

use thiserror::Error;

use crate::trace_model::{TraceError, TraceSet};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown identifier code '{id}' at time #{time}")]
    UnknownId { id: String, time: u64, line: usize },
    #[error("input truncated: {message} (last good timestamp: {})", fmt_last(.last_timestamp))]
    Truncated {
        last_timestamp: Option<u64>,
        message: String,
    },
    #[error("selection '{pattern}' matches no signal; available: {}", .available.join(", "))]
    NoMatch { pattern: String, available: Vec<String> },
    #[error("signal '{signal}': {message}")]
    Binarize { signal: String, message: String },
    #[error("record {index}: exit from '{source_name}.{function}' without a matching enter")]
    UnmatchedExit {
        index: usize,
        source_name: String,
        function: String,
    },
    #[error("record {index}: timestamp {timestamp} maps to cycle {cycle}, beyond the {cycles}-cycle trace")]
    OutOfRange {
        index: usize,
        timestamp: u64,
        cycle: u64,
        cycles: usize,
    },
    #[error("quantum must be at least 1")]
    BadQuantum,
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Keeps the measurements matching any of `patterns` (`*` wildcards), in
/// pattern order and then trace order. An empty list keeps everything.
pub fn select(traces: &TraceSet, patterns: &[String]) -> Result<TraceSet, IngestError> {
    if patterns.is_empty() {
        return Ok(traces.clone());
    }
    let mut out = TraceSet::new(traces.cycles())?.with_timescale(traces.timescale());
    for pattern in patterns {
        let mut matched = false;
        for m in traces.measurements() {
            if vcd::glob_match(pattern, &m.id.name) {
                matched = true;
                if out.get(&m.id.name).is_none() {
                    out.push(m.id.name.clone(), m.id.group.clone(), m.trace.clone())?;
                }
            }
        }
        if !matched {
            return Err(IngestError::NoMatch {
                pattern: pattern.clone(),
                available: traces.names().map(str::to_string).collect(),
            });
        }
    }
    Ok(out)
}

fn fmt_last(t: &Option<u64>) -> String {
    match t {
        Some(t) => format!("#{t}"),
        None => "none".to_string(),
    }
}

/// A non-fatal observation made while building traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning(pub String);

impl std::fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Traces plus any warnings raised while producing them.
#[derive(Debug, Clone)]
pub struct Densified {
    pub traces: TraceSet,
    pub warnings: Vec<IngestWarning>,
}
