use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Densified, IngestError, IngestWarning};
use crate::trace_model::{BinTrace, TraceSet};

const HEADER: [&str; 4] = ["timestamp", "source", "function", "kind"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Enter,
    Exit,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Enter => "enter",
            EventKind::Exit => "exit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub timestamp: u64,
    pub source: String,
    pub function: String,
    pub kind: EventKind,
}

/// Function enter/exit records, as produced by compiler-inserted hooks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// CSV with header `timestamp,source,function,kind`.
    pub fn to_csv(&self) -> String {
        let mut out = HEADER.join(",");
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.timestamp, r.source, r.function, r.kind);
        }
        out
    }
}

/// Parses the CSV event log. Records keep file order.
pub fn parse_eventlog(input: &[u8]) -> Result<EventLog, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| IngestError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(HEADER) {
        return Err(IngestError::Parse {
            line: 1,
            message: format!(
                "expected header '{}', found '{}'",
                HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut records = Vec::new();
    let mut last_seen: HashMap<String, u64> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| IngestError::Parse { line, message };
        let timestamp = row[0]
            .parse::<u64>()
            .map_err(|_| bad(format!("bad timestamp '{}'", &row[0])))?;
        let kind = match &row[3] {
            "enter" => EventKind::Enter,
            "exit" => EventKind::Exit,
            other => return Err(bad(format!("unknown kind '{other}' (expected enter or exit)"))),
        };
        let source = row[1].to_string();
        if source.is_empty() || row[2].is_empty() {
            return Err(bad("empty source or function".into()));
        }
        if let Some(&prev) = last_seen.get(&source) {
            if timestamp < prev {
                return Err(bad(format!(
                    "timestamp {timestamp} for source '{source}' is earlier than {prev}"
                )));
            }
        }
        last_seen.insert(source.clone(), timestamp);
        records.push(EventRecord {
            timestamp,
            source,
            function: row[2].to_string(),
            kind,
        });
    }
    Ok(EventLog { records })
}

/// One activity trace per `(source, function)`, named `source.function`.
///
/// A function is active on `[enter, exit)`; nested entries are counted so it
/// stays active until the outermost exit. Timestamps are divided by
/// `quantum` to get cycles and may not exceed `cycles`. Traces are ordered
/// by source, then function.
pub fn functions_to_traces(log: &EventLog, cycles: usize, quantum: u64) -> Result<Densified, IngestError> {
    if quantum == 0 {
        return Err(IngestError::BadQuantum);
    }
    struct Activity {
        depth: u32,
        since: usize,
        trace: BinTrace,
    }
    let mut funcs: BTreeMap<(&str, &str), Activity> = BTreeMap::new();
    for (index, r) in log.records.iter().enumerate() {
        let cycle = r.timestamp / quantum;
        if cycle > cycles as u64 {
            return Err(IngestError::OutOfRange {
                index,
                timestamp: r.timestamp,
                cycle,
                cycles,
            });
        }
        let cycle = cycle as usize;
        let act = match funcs.entry((r.source.as_str(), r.function.as_str())) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(Activity {
                depth: 0,
                since: 0,
                trace: BinTrace::zeros(cycles)?,
            }),
        };
        match r.kind {
            EventKind::Enter => {
                if act.depth == 0 {
                    act.since = cycle;
                }
                act.depth += 1;
            }
            EventKind::Exit => {
                if act.depth == 0 {
                    return Err(IngestError::UnmatchedExit {
                        index,
                        source_name: r.source.clone(),
                        function: r.function.clone(),
                    });
                }
                act.depth -= 1;
                if act.depth == 0 {
                    act.trace.fill(act.since, cycle, true);
                }
            }
        }
    }

    let mut traces = TraceSet::new(cycles)?;
    let mut warnings = Vec::new();
    for ((source, function), mut act) in funcs {
        if act.depth > 0 {
            act.trace.fill(act.since, cycles, true);
            warnings.push(IngestWarning(format!(
                "{source}.{function} never exits; treated as active until cycle {cycles}"
            )));
        }
        traces.push(format!("{source}.{function}"), Some(source.to_string()), act.trace)?;
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(Densified { traces, warnings })
}
