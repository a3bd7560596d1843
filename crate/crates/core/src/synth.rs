//! Synthetic fixtures shaped like the two case studies.
//!
//! `probsys` models an interconnect master and slave: request channels fire
//! as independent Bernoulli streams, reply channels repeat their request a
//! fixed number of cycles later, and the slave exposes `busy`, `idle` and
//! `stall`. `tinn` schedules function activity on two processors in phases
//! and emits the enter/exit log that instrumentation hooks would produce.
//!
//! Random draws use xoshiro256** seeded through SplitMix64
//! (`Xoshiro256StarStar::seed_from_u64`). A Bernoulli(p) sample is
//! `(next_u64() >> 11) · 2⁻⁵³ < p`. Each channel owns its stream, seeded with
//! `fixture_seed ^ (channel_seed · 0x9E3779B97F4A7C15)`.

use std::collections::{BTreeMap, HashMap};

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{functions_to_traces, EventKind, EventLog, EventRecord, IngestError};
use crate::trace_model::{BinTrace, TraceError, TraceSet};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{name}: probability {value} is outside [0, 1]")]
    BadProbability { name: String, value: f64 },
    #[error("channel '{channel}' replies to unknown channel '{target}'")]
    DanglingReply { channel: String, target: String },
    #[error("channel '{channel}' is part of a reply cycle")]
    ReplyCycle { channel: String },
    #[error("'{name}' is declared twice")]
    Duplicate { name: String },
    #[error("{source_name}: '{a}' and '{b}' are both active at depth {depth} in cycle {cycle}")]
    Overlap {
        source_name: String,
        depth: u32,
        a: String,
        b: String,
        cycle: usize,
    },
    #[error("{function}: {message}")]
    BadPhase { function: String, message: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn stream(fixture_seed: u64, channel_seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(fixture_seed ^ channel_seed.wrapping_mul(GOLDEN))
}

#[inline]
fn bernoulli(rng: &mut Xoshiro256StarStar, p: f64) -> bool {
    ((rng.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < p
}

fn check_probability(name: &str, value: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SynthError::BadProbability {
            name: name.to_string(),
            value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reply {
    pub channel: String,
    pub latency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub name: String,
    /// Per-cycle firing probability; unused by reply channels.
    #[serde(default)]
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<Reply>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

impl ChannelModel {
    pub fn request(name: &str, group: &str, probability: f64, seed: u64) -> Self {
        ChannelModel {
            name: name.into(),
            probability,
            reply_to: None,
            group: Some(group.into()),
            seed,
        }
    }

    pub fn reply(name: &str, group: &str, to: &str, latency: usize) -> Self {
        ChannelModel {
            name: name.into(),
            probability: 0.0,
            reply_to: Some(Reply {
                channel: to.into(),
                latency,
            }),
            group: Some(group.into()),
            seed: 0,
        }
    }
}

/// Slave-side state derived from the channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaveModel {
    /// Prefix of the `busy`, `idle` and `stall` traces.
    pub name: String,
    pub stall_probability: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbsysConfig {
    pub cycles: usize,
    #[serde(default)]
    pub seed: u64,
    pub channels: Vec<ChannelModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slave: Option<SlaveModel>,
}

impl ProbsysConfig {
    /// Write path `AW → W → B` and read path `AR → R` on independent
    /// streams, plus a slave. Each request fires with probability 3 to 4 %.
    /// At that rate the chance covariance of two unrelated channels in a
    /// 512-cycle window stays several standard deviations below 0.05.
    pub fn axi() -> Self {
        ProbsysConfig {
            cycles: 8192,
            seed: 2020,
            channels: vec![
                ChannelModel::request("write.AW", "write", 0.03, 1),
                ChannelModel::reply("write.W", "write", "write.AW", 1),
                ChannelModel::reply("write.B", "write", "write.W", 5),
                ChannelModel::request("read.AR", "read", 0.04, 2),
                ChannelModel::reply("read.R", "read", "read.AR", 5),
            ],
            slave: Some(SlaveModel {
                name: "slave".into(),
                stall_probability: 0.2,
                seed: 3,
            }),
        }
    }
}

/// Builds one trace per channel, then the slave's `busy`, `idle` and `stall`.
///
/// A request firing at `s` whose reply chain completes `L` cycles later
/// keeps the slave busy over `[s, s + L]`. `idle` is the complement of
/// `busy`, and `stall` is an independent Bernoulli stream masked to busy
/// cycles. Traces follow the declaration order of `channels`.
pub fn gen_probsys(config: &ProbsysConfig) -> Result<TraceSet, SynthError> {
    let cycles = config.cycles;
    let mut index = HashMap::new();
    for (i, ch) in config.channels.iter().enumerate() {
        if index.insert(ch.name.as_str(), i).is_some() {
            return Err(SynthError::Duplicate { name: ch.name.clone() });
        }
        if ch.reply_to.is_none() {
            check_probability(&ch.name, ch.probability)?;
        }
    }
    for ch in &config.channels {
        if let Some(r) = &ch.reply_to {
            if !index.contains_key(r.channel.as_str()) {
                return Err(SynthError::DanglingReply {
                    channel: ch.name.clone(),
                    target: r.channel.clone(),
                });
            }
        }
    }

    // root request and cumulative latency of every channel
    let mut origin: Vec<(usize, usize)> = Vec::with_capacity(config.channels.len());
    for (i, ch) in config.channels.iter().enumerate() {
        let (mut at, mut lat, mut hops) = (i, 0usize, 0usize);
        while let Some(r) = &config.channels[at].reply_to {
            lat += r.latency;
            at = index[r.channel.as_str()];
            hops += 1;
            if hops > config.channels.len() {
                return Err(SynthError::ReplyCycle {
                    channel: ch.name.clone(),
                });
            }
        }
        origin.push((at, lat));
    }

    let mut roots: BTreeMap<usize, BinTrace> = BTreeMap::new();
    for (i, ch) in config.channels.iter().enumerate() {
        if ch.reply_to.is_none() {
            let mut rng = stream(config.seed, ch.seed);
            let trace = BinTrace::from_bools((0..cycles).map(|_| bernoulli(&mut rng, ch.probability)))?;
            roots.insert(i, trace);
        }
    }

    let mut traces = TraceSet::new(cycles)?;
    for (ch, &(root, lat)) in config.channels.iter().zip(&origin) {
        let src = &roots[&root];
        let trace = if lat == 0 {
            src.clone()
        } else {
            BinTrace::from_bools((0..cycles).map(|t| t >= lat && src.get(t - lat)))?
        };
        traces.push(ch.name.clone(), ch.group.clone(), trace)?;
    }

    if let Some(slave) = &config.slave {
        check_probability(&slave.name, slave.stall_probability)?;
        let mut span = vec![0usize; config.channels.len()];
        for &(root, lat) in &origin {
            span[root] = span[root].max(lat);
        }
        let mut busy = BinTrace::zeros(cycles)?;
        for (&root, trace) in &roots {
            for s in (0..cycles).filter(|&s| trace.get(s)) {
                busy.fill(s, (s + span[root] + 1).min(cycles), true);
            }
        }
        let idle = BinTrace::from_bools((0..cycles).map(|t| !busy.get(t)))?;
        let mut rng = stream(config.seed, slave.seed);
        let stall = BinTrace::from_bools((0..cycles).map(|t| {
            let draw = bernoulli(&mut rng, slave.stall_probability);
            draw && busy.get(t)
        }))?;
        let group = Some(slave.name.clone());
        traces.push(format!("{}.busy", slave.name), group.clone(), busy)?;
        traces.push(format!("{}.idle", slave.name), group.clone(), idle)?;
        traces.push(format!("{}.stall", slave.name), group, stall)?;
    }
    Ok(traces)
}

/// Repeating activity inside `[start, end)`: the function is active on
/// cycles `t` with `(t - start - offset) mod period < active`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub start: usize,
    pub end: usize,
    pub period: usize,
    pub active: usize,
    #[serde(default)]
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSchedule {
    pub source: String,
    pub name: String,
    /// Call-stack depth; functions of one source at one depth may not overlap.
    #[serde(default)]
    pub depth: u32,
    pub phases: Vec<Phase>,
}

impl FunctionSchedule {
    fn active_intervals(&self, cycles: usize) -> Result<Vec<(usize, usize)>, SynthError> {
        let bad = |message: String| SynthError::BadPhase {
            function: format!("{}.{}", self.source, self.name),
            message,
        };
        let mut out: Vec<(usize, usize)> = Vec::new();
        for p in &self.phases {
            if p.period == 0 || p.active > p.period || p.start > p.end || p.end > cycles {
                return Err(bad(format!(
                    "phase [{}, {}) period {} active {} is not valid for {cycles} cycles",
                    p.start, p.end, p.period, p.active
                )));
            }
            if p.active == 0 {
                continue;
            }
            let mut s = p.start + p.offset % p.period;
            // a period straddling the start contributes its tail
            if p.offset % p.period + p.active > p.period {
                let tail = p.offset % p.period + p.active - p.period;
                out.push((p.start, (p.start + tail).min(p.end)));
            }
            while s < p.end {
                out.push((s, (s + p.active).min(p.end)));
                s += p.period;
            }
        }
        out.sort_unstable();
        // merge touching intervals so each activity is one enter/exit pair
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(out.len());
        for (a, b) in out.into_iter().filter(|(a, b)| a < b) {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(merged)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TinnConfig {
    pub cycles: usize,
    pub functions: Vec<FunctionSchedule>,
}

impl TinnConfig {
    /// Two processors over two equal phases. In the first, `SCPU.train`
    /// runs 80 % of each 100-cycle batch while `ACPU` collects and waits.
    /// In the second, `SCPU.infer` replaces it for 40 % of each batch and
    /// `ACPU` reports results.
    pub fn two_phase() -> Self {
        let cycles = 32768;
        let half = cycles / 2;
        let both = |period, active, offset| {
            vec![
                Phase {
                    start: 0,
                    end: half,
                    period,
                    active,
                    offset,
                },
                Phase {
                    start: half,
                    end: cycles,
                    period,
                    active,
                    offset,
                },
            ]
        };
        let first = |period, active, offset| {
            vec![Phase {
                start: 0,
                end: half,
                period,
                active,
                offset,
            }]
        };
        let second = |period, active, offset| {
            vec![Phase {
                start: half,
                end: cycles,
                period,
                active,
                offset,
            }]
        };
        let f = |source: &str, name: &str, depth, phases| FunctionSchedule {
            source: source.into(),
            name: name.into(),
            depth,
            phases,
        };
        TinnConfig {
            cycles,
            functions: vec![
                f("ACPU", "send", 0, both(100, 8, 0)),
                f("ACPU", "wait", 0, first(100, 40, 8)),
                f("ACPU", "report", 0, second(100, 20, 8)),
                f("ACPU", "collect", 0, both(100, 50, 50)),
                f("ACPU", "read_usb", 1, both(100, 10, 60)),
                f("SCPU", "recv", 0, both(100, 8, 0)),
                f("SCPU", "train", 0, first(100, 80, 10)),
                f("SCPU", "infer", 0, second(100, 40, 10)),
                f("SCPU", "forward", 1, both(100, 30, 15)),
                f("SCPU", "backprop", 1, first(100, 30, 55)),
            ],
        }
    }
}

/// Enter/exit records for the schedules, ordered by time with exits first,
/// then by source and function.
pub fn gen_tinn_like(functions: &[FunctionSchedule], cycles: usize) -> Result<EventLog, SynthError> {
    let mut seen = HashMap::new();
    let mut intervals = Vec::with_capacity(functions.len());
    for f in functions {
        if seen.insert((f.source.as_str(), f.name.as_str()), ()).is_some() {
            return Err(SynthError::Duplicate {
                name: format!("{}.{}", f.source, f.name),
            });
        }
        intervals.push(f.active_intervals(cycles)?);
    }

    // no two functions of one source share a depth at the same time;
    // lanes hold (start, end, function index)
    type Lane = Vec<(usize, usize, usize)>;
    let mut lanes: BTreeMap<(&str, u32), Lane> = BTreeMap::new();
    for (i, (f, iv)) in functions.iter().zip(&intervals).enumerate() {
        let lane = lanes.entry((f.source.as_str(), f.depth)).or_default();
        lane.extend(iv.iter().map(|&(a, b)| (a, b, i)));
    }
    for ((source, depth), lane) in &mut lanes {
        lane.sort_unstable();
        for w in lane.windows(2) {
            let ((_, end, i), (start, _, j)) = (w[0], w[1]);
            if start < end {
                return Err(SynthError::Overlap {
                    source_name: source.to_string(),
                    depth: *depth,
                    a: functions[i].name.clone(),
                    b: functions[j].name.clone(),
                    cycle: start,
                });
            }
        }
    }

    let mut records: Vec<EventRecord> = functions
        .iter()
        .zip(&intervals)
        .flat_map(|(f, iv)| {
            iv.iter().flat_map(move |&(a, b)| {
                [(a, EventKind::Enter), (b, EventKind::Exit)].map(|(t, kind)| EventRecord {
                    timestamp: t as u64,
                    source: f.source.clone(),
                    function: f.name.clone(),
                    kind,
                })
            })
        })
        .collect();
    let rank = |k: EventKind| match k {
        EventKind::Exit => 0,
        EventKind::Enter => 1,
    };
    records.sort_by(|x, y| {
        (x.timestamp, rank(x.kind), &x.source, &x.function).cmp(&(y.timestamp, rank(y.kind), &y.source, &y.function))
    });
    Ok(EventLog { records })
}

/// A fixture as written in a run configuration, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Fixture {
    Probsys(ProbsysConfig),
    Tinn(TinnConfig),
}

impl Fixture {
    /// Resolves `probsys` and `tinn` to the built-in fixtures.
    pub fn builtin(name: &str) -> Option<Fixture> {
        match name {
            "probsys" => Some(Fixture::Probsys(ProbsysConfig::axi())),
            "tinn" => Some(Fixture::Tinn(TinnConfig::two_phase())),
            _ => None,
        }
    }

    /// Overrides the fixture seed; the tinn schedule has none.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Fixture::Probsys(p) = &mut self {
            p.seed = seed;
        }
        self
    }

    pub fn cycles(&self) -> usize {
        match self {
            Fixture::Probsys(p) => p.cycles,
            Fixture::Tinn(t) => t.cycles,
        }
    }

    /// Generates the traces. Function logs go through the same conversion
    /// as recorded logs.
    pub fn traces(&self) -> Result<TraceSet, SynthError> {
        match self {
            Fixture::Probsys(p) => gen_probsys(p),
            Fixture::Tinn(t) => {
                let log = gen_tinn_like(&t.functions, t.cycles)?;
                Ok(functions_to_traces(&log, t.cycles, 1)?.traces)
            }
        }
    }
}
