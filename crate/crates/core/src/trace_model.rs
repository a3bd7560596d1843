//! Dense binary timelines and the implied-measurement algebra.
//!
//! Every measurement is a binary signal sampled once per cycle over
//! `t ∈ [0, T)`. Samples are stored packed, 64 cycles per word, least
//! significant bit first. Out-of-range samples read as 0.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace length must be at least 1 cycle")]
    Empty,
    #[error("sample {value} at cycle {cycle} is not binary")]
    NotBinary { cycle: usize, value: u8 },
    #[error("measurement '{name}' has {found} cycles, expected {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate measurement name '{0}'")]
    DuplicateName(String),
    #[error("measurement name must not be empty")]
    EmptyName,
}

/// Identity of one measurement within a [`TraceSet`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementId {
    pub index: usize,
    pub name: String,
    /// Cluster label used to order nodes around the circle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// A binary timeline over `[0, len)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinTrace {
    words: Vec<u64>,
    len: usize,
}

impl fmt::Debug for BinTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinTrace(len={}, ", self.len)?;
        if self.len <= 128 {
            for t in 0..self.len {
                f.write_str(if self.get(t) { "1" } else { "0" })?;
            }
        } else {
            write!(f, "ones={}", self.count_ones())?;
        }
        f.write_str(")")
    }
}

impl BinTrace {
    /// An all-zero trace.
    pub fn zeros(len: usize) -> Result<Self, TraceError> {
        if len == 0 {
            return Err(TraceError::Empty);
        }
        Ok(Self {
            words: vec![0; words_for(len)],
            len,
        })
    }

    /// An all-one trace.
    pub fn ones(len: usize) -> Result<Self, TraceError> {
        let mut trace = Self::zeros(len)?;
        trace.fill(0, len, true);
        Ok(trace)
    }

    /// Builds a trace from samples that must each be 0 or 1.
    pub fn from_bits(bits: &[u8]) -> Result<Self, TraceError> {
        let mut trace = Self::zeros(bits.len())?;
        for (t, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => trace.set(t, true),
                value => return Err(TraceError::NotBinary { cycle: t, value }),
            }
        }
        Ok(trace)
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self, TraceError> {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut trace = Self::zeros(bits.len())?;
        for (t, b) in bits.into_iter().enumerate() {
            if b {
                trace.set(t, true);
            }
        }
        Ok(trace)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; a trace holds at least one cycle.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, t: usize) -> bool {
        assert!(t < self.len, "cycle {t} out of range for trace of {}", self.len);
        (self.words[t / WORD_BITS] >> (t % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub(crate) fn set(&mut self, t: usize, value: bool) {
        let mask = 1u64 << (t % WORD_BITS);
        if value {
            self.words[t / WORD_BITS] |= mask;
        } else {
            self.words[t / WORD_BITS] &= !mask;
        }
    }

    /// Sets every cycle in `[start, end)` (clamped to the trace) to `value`.
    pub(crate) fn fill(&mut self, start: usize, end: usize, value: bool) {
        let end = end.min(self.len);
        let mut t = start;
        while t < end {
            let word = t / WORD_BITS;
            let lo = t % WORD_BITS;
            let hi = (end - word * WORD_BITS).min(WORD_BITS);
            let mask = if hi - lo == WORD_BITS {
                u64::MAX
            } else {
                ((1u64 << (hi - lo)) - 1) << lo
            };
            if value {
                self.words[word] |= mask;
            } else {
                self.words[word] &= !mask;
            }
            t = word * WORD_BITS + hi;
        }
    }

    /// Packed samples; bits past `len` in the last word are zero.
    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|t| u8::from(self.get(t))).collect()
    }

    /// Value of the trace at `t + delta`, or 0 when that falls outside the record.
    #[inline]
    pub fn shifted_sample(&self, t: i64, delta: i64) -> u8 {
        match t.checked_add(delta) {
            Some(s) if s >= 0 && (s as u64) < self.len as u64 => u8::from(self.get(s as usize)),
            _ => 0,
        }
    }

    /// Derives one of the four implied measurements.
    ///
    /// Rise and Fall are 0 at `t = 0`: the state before the record is unknown,
    /// so no edge is reported there.
    pub fn implied(&self, kind: ImpliedKind) -> BinTrace {
        let mut words = match kind {
            ImpliedKind::Level => self.words.clone(),
            ImpliedKind::Reflect => self.words.iter().map(|w| !w).collect(),
            ImpliedKind::Rise | ImpliedKind::Fall => {
                let mut carry = 0u64;
                self.words
                    .iter()
                    .map(|&w| {
                        // bit t of `prev` holds f(t-1); cycle 0 is cleared below
                        let prev = (w << 1) | carry;
                        carry = w >> 63;
                        if kind == ImpliedKind::Rise {
                            w & !prev
                        } else {
                            !w & prev
                        }
                    })
                    .collect::<Vec<_>>()
            }
        };
        if matches!(kind, ImpliedKind::Rise | ImpliedKind::Fall) {
            words[0] &= !1;
        }
        let mut out = BinTrace { words, len: self.len };
        out.clear_tail();
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Copies cycles `[start, start + out.len()*64)` into `out`, bit 0 of
    /// `out[0]` holding cycle `start`. Cycles outside `[0, len)` read as 0.
    pub fn extract_into(&self, start: i64, out: &mut [u64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.word_at(start + (k * WORD_BITS) as i64);
        }
    }

    /// 64 samples beginning at cycle `pos` (which may be negative).
    #[inline]
    fn word_at(&self, pos: i64) -> u64 {
        let n = self.words.len() as i64;
        let idx = pos.div_euclid(WORD_BITS as i64);
        let off = pos.rem_euclid(WORD_BITS as i64) as u32;
        let load = |i: i64| -> u64 {
            if i >= 0 && i < n {
                self.words[i as usize]
            } else {
                0
            }
        };
        if off == 0 {
            load(idx)
        } else {
            (load(idx) >> off) | (load(idx + 1) << (64 - off))
        }
    }
}

/// The four implied measurements derived from every real one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpliedKind {
    /// The measurement itself.
    Level,
    /// Logical complement, `1 - f(t)`.
    Reflect,
    /// `max(0, f(t) - f(t-1))`.
    Rise,
    /// `max(0, ¬f(t) - ¬f(t-1))`.
    Fall,
}

impl ImpliedKind {
    pub const ALL: [ImpliedKind; 4] = [
        ImpliedKind::Level,
        ImpliedKind::Reflect,
        ImpliedKind::Rise,
        ImpliedKind::Fall,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ImpliedKind::Level => "level",
            ImpliedKind::Reflect => "reflect",
            ImpliedKind::Rise => "rise",
            ImpliedKind::Fall => "fall",
        }
    }
}

impl fmt::Display for ImpliedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown implied kind '{0}' (expected level, reflect, rise or fall)")]
pub struct ParseKindError(pub String);

impl FromStr for ImpliedKind {
    type Err = ParseKindError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "level" => Ok(ImpliedKind::Level),
            "reflect" => Ok(ImpliedKind::Reflect),
            "rise" => Ok(ImpliedKind::Rise),
            "fall" => Ok(ImpliedKind::Fall),
            _ => Err(ParseKindError(s.to_string())),
        }
    }
}

/// A subset of implied kinds, always iterated in `Level < Reflect < Rise < Fall` order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KindSet(BTreeSet<ImpliedKind>);

impl KindSet {
    pub fn all() -> Self {
        ImpliedKind::ALL.into_iter().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, kind: ImpliedKind) -> bool {
        self.0.contains(&kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = ImpliedKind> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<ImpliedKind> for KindSet {
    fn from_iter<I: IntoIterator<Item = ImpliedKind>>(iter: I) -> Self {
        KindSet(iter.into_iter().collect())
    }
}

/// One value per implied kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KindValues {
    pub level: f64,
    pub reflect: f64,
    pub rise: f64,
    pub fall: f64,
}

impl KindValues {
    pub fn from_fn(mut f: impl FnMut(ImpliedKind) -> f64) -> Self {
        KindValues {
            level: f(ImpliedKind::Level),
            reflect: f(ImpliedKind::Reflect),
            rise: f(ImpliedKind::Rise),
            fall: f(ImpliedKind::Fall),
        }
    }
}

impl std::ops::Index<ImpliedKind> for KindValues {
    type Output = f64;

    fn index(&self, kind: ImpliedKind) -> &f64 {
        match kind {
            ImpliedKind::Level => &self.level,
            ImpliedKind::Reflect => &self.reflect,
            ImpliedKind::Rise => &self.rise,
            ImpliedKind::Fall => &self.fall,
        }
    }
}

/// A half-open cycle interval `[u, v)` with its precomputed power-of-sine weights.
///
/// Built by [`crate::measures::window_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub(crate) u: usize,
    pub(crate) v: usize,
    pub(crate) alpha: f64,
    pub(crate) weights: Vec<f64>,
    pub(crate) weight_sum: f64,
}

impl WindowSpec {
    #[inline]
    pub fn start(&self) -> usize {
        self.u
    }

    #[inline]
    pub fn end(&self) -> usize {
        self.v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.v - self.u
    }

    /// Always false; windows span at least three cycles.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.v == self.u
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `w(u)..w(v-1)`.
    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }
}

/// Physical duration of one time unit, e.g. `10 ns`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timescale {
    pub magnitude: u32,
    pub unit: TimeUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    S,
    Ms,
    Us,
    Ns,
    Ps,
    Fs,
}

impl TimeUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::S => "s",
            TimeUnit::Ms => "ms",
            TimeUnit::Us => "us",
            TimeUnit::Ns => "ns",
            TimeUnit::Ps => "ps",
            TimeUnit::Fs => "fs",
        }
    }
}

impl FromStr for TimeUnit {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "s" => TimeUnit::S,
            "ms" => TimeUnit::Ms,
            "us" => TimeUnit::Us,
            "ns" => TimeUnit::Ns,
            "ps" => TimeUnit::Ps,
            "fs" => TimeUnit::Fs,
            _ => return Err(()),
        })
    }
}

impl fmt::Display for Timescale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.magnitude, self.unit.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Measurement {
    pub id: MeasurementId,
    pub trace: BinTrace,
}

/// A set of equally long measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSet {
    len: usize,
    measurements: Vec<Measurement>,
    timescale: Option<Timescale>,
}

impl TraceSet {
    /// An empty set whose traces will all have `len` cycles.
    pub fn new(len: usize) -> Result<Self, TraceError> {
        if len == 0 {
            return Err(TraceError::Empty);
        }
        Ok(Self {
            len,
            measurements: Vec::new(),
            timescale: None,
        })
    }

    pub fn with_timescale(mut self, timescale: Option<Timescale>) -> Self {
        self.timescale = timescale;
        self
    }

    /// Appends a measurement; its index is its position in the set.
    pub fn push(
        &mut self,
        name: impl Into<String>,
        group: Option<String>,
        trace: BinTrace,
    ) -> Result<&MeasurementId, TraceError> {
        let name = name.into();
        if name.is_empty() {
            return Err(TraceError::EmptyName);
        }
        if trace.len() != self.len {
            return Err(TraceError::LengthMismatch {
                name,
                expected: self.len,
                found: trace.len(),
            });
        }
        if self.measurements.iter().any(|m| m.id.name == name) {
            return Err(TraceError::DuplicateName(name));
        }
        let index = self.measurements.len();
        self.measurements.push(Measurement {
            id: MeasurementId { index, name, group },
            trace,
        });
        Ok(&self.measurements[index].id)
    }

    /// Number of cycles `T` shared by every trace.
    #[inline]
    pub fn cycles(&self) -> usize {
        self.len
    }

    pub fn timescale(&self) -> Option<Timescale> {
        self.timescale
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.id.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.measurements.iter().map(|m| m.id.name.as_str())
    }
}
