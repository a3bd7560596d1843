use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use log::warn;

use super::{Densified, IngestError, IngestWarning};
use crate::trace_model::{BinTrace, TimeUnit, Timescale, TraceSet};

/// One four-state bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Logic {
    Zero,
    One,
    X,
    Z,
}

impl Logic {
    fn from_char(c: char) -> Option<Logic> {
        match c {
            '0' => Some(Logic::Zero),
            '1' => Some(Logic::One),
            'x' | 'X' => Some(Logic::X),
            'z' | 'Z' => Some(Logic::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Logic::Zero => '0',
            Logic::One => '1',
            Logic::X => 'x',
            Logic::Z => 'z',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VcdValue {
    /// Most significant bit first, as written in the file.
    Bits(Vec<Logic>),
    Real(f64),
}

impl VcdValue {
    /// Bit `k` (0 = least significant) after left-extension to the variable width.
    pub fn bit(&self, k: usize) -> Logic {
        match self {
            VcdValue::Bits(bits) => {
                if k < bits.len() {
                    bits[bits.len() - 1 - k]
                } else {
                    match bits.first() {
                        Some(Logic::X) => Logic::X,
                        Some(Logic::Z) => Logic::Z,
                        _ => Logic::Zero,
                    }
                }
            }
            VcdValue::Real(v) => {
                if k == 0 && *v != 0.0 {
                    Logic::One
                } else {
                    Logic::Zero
                }
            }
        }
    }

    /// True when any bit is a definite 1. Unknown bits count as 0.
    pub fn is_nonzero(&self) -> bool {
        match self {
            VcdValue::Bits(bits) => bits.contains(&Logic::One),
            VcdValue::Real(v) => *v != 0.0,
        }
    }
}

impl fmt::Display for VcdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VcdValue::Bits(bits) => bits.iter().try_for_each(|b| f.write_char(b.as_char())),
            VcdValue::Real(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcdVar {
    pub var_type: String,
    pub width: u32,
    pub id: String,
    /// Dotted path through the enclosing scopes.
    pub name: String,
}

impl VcdVar {
    fn scope_path(&self) -> Option<&str> {
        self.name.rsplit_once('.').map(|(scope, _)| scope)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeNode {
    pub kind: String,
    pub name: String,
    pub children: Vec<ScopeNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcdChange {
    pub time: u64,
    pub id: String,
    pub value: VcdValue,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VcdDocument {
    pub timescale: Option<Timescale>,
    pub scopes: Vec<ScopeNode>,
    pub vars: Vec<VcdVar>,
    /// In file order; times never decrease.
    pub changes: Vec<VcdChange>,
    /// The final `#` timestamp, whether or not any change follows it.
    pub end_time: Option<u64>,
}

impl VcdDocument {
    pub fn last_timestamp(&self) -> Option<u64> {
        let last_change = self.changes.last().map(|c| c.time);
        last_change.max(self.end_time)
    }
}

struct Tokens<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Tokens { text, pos: 0, line: 1 }
    }

    fn next(&mut self) -> Option<(&'a str, usize)> {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            if bytes[self.pos] == b'\n' {
                self.line += 1;
            }
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < bytes.len() && !bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some((&self.text[start..self.pos], self.line))
    }

    /// Tokens up to the next `$end`.
    fn until_end(&mut self, what: &str, last: Option<u64>) -> Result<Vec<&'a str>, IngestError> {
        let mut body = Vec::new();
        loop {
            match self.next() {
                Some(("$end", _)) => return Ok(body),
                Some((tok, _)) => body.push(tok),
                None => {
                    return Err(IngestError::Truncated {
                        last_timestamp: last,
                        message: format!("missing $end after {what}"),
                    })
                }
            }
        }
    }
}

fn parse_timescale(body: &[&str], line: usize) -> Result<Timescale, IngestError> {
    let joined: String = body.concat();
    let split = joined.find(|c: char| !c.is_ascii_digit()).unwrap_or(joined.len());
    let (num, unit) = joined.split_at(split);
    let magnitude = num.parse::<u32>().ok().filter(|m| matches!(m, 1 | 10 | 100));
    match (magnitude, unit.parse::<TimeUnit>()) {
        (Some(magnitude), Ok(unit)) => Ok(Timescale { magnitude, unit }),
        _ => Err(IngestError::Parse {
            line,
            message: format!("bad $timescale '{}'", body.join(" ")),
        }),
    }
}

fn parse_bits(s: &str) -> Option<Vec<Logic>> {
    if s.is_empty() {
        return None;
    }
    s.chars().map(Logic::from_char).collect()
}

/// Parses a value change dump.
///
/// Header directives `$scope`, `$upscope`, `$var`, `$timescale`, `$comment`,
/// `$date`, `$version` and `$enddefinitions` are understood. In the body,
/// `$dumpvars`, `$dumpall`, `$dumpon` and `$dumpoff` blocks are read as
/// ordinary changes at the current time (0 before the first `#`).
pub fn parse_vcd(input: &[u8]) -> Result<VcdDocument, IngestError> {
    let text = String::from_utf8_lossy(input);
    let mut toks = Tokens::new(&text);
    let mut doc = VcdDocument::default();
    let mut scope_stack: Vec<ScopeNode> = Vec::new();
    let mut path: Vec<String> = Vec::new();

    loop {
        let Some((tok, line)) = toks.next() else {
            return Err(IngestError::Truncated {
                last_timestamp: None,
                message: "header ended before $enddefinitions".into(),
            });
        };
        match tok {
            "$timescale" => {
                let body = toks.until_end("$timescale", None)?;
                doc.timescale = Some(parse_timescale(&body, line)?);
            }
            "$scope" => {
                let body = toks.until_end("$scope", None)?;
                let (kind, name) = match body.as_slice() {
                    [kind, name] => (kind.to_string(), name.to_string()),
                    [name] => ("module".to_string(), name.to_string()),
                    _ => {
                        return Err(IngestError::Parse {
                            line,
                            message: format!("malformed $scope '{}'", body.join(" ")),
                        })
                    }
                };
                path.push(name.clone());
                scope_stack.push(ScopeNode {
                    kind,
                    name,
                    children: Vec::new(),
                });
            }
            "$upscope" => {
                toks.until_end("$upscope", None)?;
                let Some(done) = scope_stack.pop() else {
                    return Err(IngestError::Parse {
                        line,
                        message: "$upscope without an open $scope".into(),
                    });
                };
                path.pop();
                match scope_stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => doc.scopes.push(done),
                }
            }
            "$var" => {
                let body = toks.until_end("$var", None)?;
                if body.len() < 4 {
                    return Err(IngestError::Parse {
                        line,
                        message: format!("malformed $var '{}'", body.join(" ")),
                    });
                }
                let width = body[1]
                    .parse::<u32>()
                    .ok()
                    .filter(|&w| w >= 1)
                    .ok_or_else(|| IngestError::Parse {
                        line,
                        message: format!("bad $var width '{}'", body[1]),
                    })?;
                let mut reference = body[3].to_string();
                if let Some(range) = body.get(4) {
                    if width == 1 && !range.contains(':') {
                        reference.push_str(range);
                    }
                } else if width > 1 {
                    if let Some(open) = reference.find('[') {
                        reference.truncate(open);
                    }
                }
                let mut name = path.join(".");
                if !name.is_empty() {
                    name.push('.');
                }
                name.push_str(&reference);
                doc.vars.push(VcdVar {
                    var_type: body[0].to_string(),
                    width,
                    id: body[2].to_string(),
                    name,
                });
            }
            "$comment" | "$date" | "$version" => {
                toks.until_end(tok, None)?;
            }
            "$enddefinitions" => {
                toks.until_end(tok, None)?;
                break;
            }
            other => {
                return Err(IngestError::Parse {
                    line,
                    message: format!("unexpected '{other}' in header"),
                })
            }
        }
    }
    if let Some(open) = scope_stack.last() {
        return Err(IngestError::Parse {
            line: toks.line,
            message: format!("scope '{}' never closed", open.name),
        });
    }

    let declared: HashSet<&str> = doc.vars.iter().map(|v| v.id.as_str()).collect();
    let mut changes = Vec::new();
    let mut now: Option<u64> = None;
    let mut block: Option<&str> = None;

    while let Some((tok, line)) = toks.next() {
        if let Some(num) = tok.strip_prefix('#') {
            let t = num.parse::<u64>().map_err(|_| IngestError::Parse {
                line,
                message: format!("bad timestamp '{tok}'"),
            })?;
            if now.is_some_and(|prev| t < prev) {
                return Err(IngestError::Parse {
                    line,
                    message: format!("timestamp #{t} goes backwards"),
                });
            }
            now = Some(t);
            continue;
        }
        match tok {
            "$dumpvars" | "$dumpall" | "$dumpon" | "$dumpoff" => {
                if let Some(open) = block {
                    return Err(IngestError::Parse {
                        line,
                        message: format!("{tok} inside unterminated {open}"),
                    });
                }
                block = Some(tok);
                continue;
            }
            "$end" => {
                if block.take().is_none() {
                    return Err(IngestError::Parse {
                        line,
                        message: "unexpected $end".into(),
                    });
                }
                continue;
            }
            "$comment" => {
                toks.until_end(tok, now)?;
                continue;
            }
            _ if tok.starts_with('$') => {
                return Err(IngestError::Parse {
                    line,
                    message: format!("unexpected '{tok}' in value changes"),
                })
            }
            _ => {}
        }

        let time = now.unwrap_or(0);
        let mut first = tok.chars();
        let lead = first.next().unwrap_or(' ');
        let (value, id, id_line) = match lead {
            '0' | '1' | 'x' | 'X' | 'z' | 'Z' => {
                let id = &tok[1..];
                if id.is_empty() {
                    if toks.pos >= toks.text.len() {
                        return Err(IngestError::Truncated {
                            last_timestamp: now,
                            message: format!("value '{tok}' without identifier"),
                        });
                    }
                    return Err(IngestError::Parse {
                        line,
                        message: format!("scalar value '{tok}' without identifier"),
                    });
                }
                let bit = Logic::from_char(lead).expect("matched above");
                (Some(VcdValue::Bits(vec![bit])), id, line)
            }
            'b' | 'B' | 'r' | 'R' | 's' | 'S' => {
                let Some((id, id_line)) = toks.next() else {
                    return Err(IngestError::Truncated {
                        last_timestamp: now,
                        message: format!("value '{tok}' without identifier"),
                    });
                };
                let body = &tok[1..];
                let value = match lead {
                    'b' | 'B' => Some(VcdValue::Bits(parse_bits(body).ok_or_else(|| IngestError::Parse {
                        line,
                        message: format!("bad vector value '{tok}'"),
                    })?)),
                    'r' | 'R' => Some(VcdValue::Real(body.parse::<f64>().map_err(|_| IngestError::Parse {
                        line,
                        message: format!("bad real value '{tok}'"),
                    })?)),
                    // string values carry no binary meaning
                    _ => None,
                };
                (value, id, id_line)
            }
            _ => {
                return Err(IngestError::Parse {
                    line,
                    message: format!("unexpected token '{tok}'"),
                })
            }
        };
        if !declared.contains(id) {
            return Err(IngestError::UnknownId {
                id: id.to_string(),
                time,
                line: id_line,
            });
        }
        if let Some(value) = value {
            changes.push(VcdChange {
                time,
                id: id.to_string(),
                value,
            });
        }
    }
    if let Some(open) = block {
        return Err(IngestError::Truncated {
            last_timestamp: now,
            message: format!("{open} block not closed"),
        });
    }
    doc.changes = changes;
    doc.end_time = now;
    Ok(doc)
}

/// How a multi-bit signal becomes binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Binarize {
    /// 1 iff any bit is 1.
    #[default]
    Nonzero,
    /// Bit `k`, 0 being least significant.
    Bit(u32),
    /// One trace per bit, named `name[k]`.
    Split,
}

impl FromStr for Binarize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s {
            "nonzero" => return Ok(Binarize::Nonzero),
            "split" => return Ok(Binarize::Split),
            _ => {}
        }
        s.strip_prefix("bit(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|k| k.trim().parse::<u32>().ok())
            .map(Binarize::Bit)
            .ok_or_else(|| format!("unknown binarization '{s}' (expected nonzero, bit(k) or split)"))
    }
}

impl fmt::Display for Binarize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binarize::Nonzero => f.write_str("nonzero"),
            Binarize::Bit(k) => write!(f, "bit({k})"),
            Binarize::Split => f.write_str("split"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensifyOptions {
    /// Native time units per cycle.
    pub quantum: u64,
    /// Trace length; defaults to the cycle of the last change plus one.
    pub cycles: Option<usize>,
    pub binarize: Binarize,
    /// Per-signal rules, matched against full names (with `*` wildcards).
    pub overrides: Vec<(String, Binarize)>,
}

impl Default for DensifyOptions {
    fn default() -> Self {
        DensifyOptions {
            quantum: 1,
            cycles: None,
            binarize: Binarize::Nonzero,
            overrides: Vec::new(),
        }
    }
}

/// Shell-style match supporting `*` only.
pub(crate) fn glob_match(pattern: &str, name: &str) -> bool {
    let p = pattern.as_bytes();
    let n = name.as_bytes();
    let (mut pi, mut ni) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ni < n.len() {
        if pi < p.len() && p[pi] == b'*' {
            star = Some((pi, ni));
            pi += 1;
        } else if pi < p.len() && p[pi] == n[ni] {
            pi += 1;
            ni += 1;
        } else if let Some((sp, sn)) = star {
            pi = sp + 1;
            ni = sn + 1;
            star = Some((sp, sn + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == b'*')
}

/// Maps a raw value to one output bit.
type BitRule = Box<dyn Fn(&VcdValue) -> bool>;

/// Turns selected VCD signals into dense binary traces.
///
/// A change at native time `t` takes effect from cycle `t / quantum` on; the
/// last change inside a cycle wins. Unknown (`x`/`z`) bits read as 0, as does
/// a signal before its first assignment. An empty selection takes every
/// declared variable.
pub fn densify(doc: &VcdDocument, selection: &[String], opts: &DensifyOptions) -> Result<Densified, IngestError> {
    if opts.quantum == 0 {
        return Err(IngestError::BadQuantum);
    }
    let mut chosen: Vec<&VcdVar> = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    if selection.is_empty() {
        for var in &doc.vars {
            if seen.insert(&var.name) {
                chosen.push(var);
            }
        }
    } else {
        for pattern in selection {
            let mut matched = false;
            for var in &doc.vars {
                if glob_match(pattern, &var.name) {
                    matched = true;
                    if seen.insert(&var.name) {
                        chosen.push(var);
                    }
                }
            }
            if !matched {
                return Err(IngestError::NoMatch {
                    pattern: pattern.clone(),
                    available: doc.vars.iter().map(|v| v.name.clone()).collect(),
                });
            }
        }
    }

    let cycles = match opts.cycles {
        Some(c) => c,
        None => doc.last_timestamp().map_or(1, |t| (t / opts.quantum) as usize + 1),
    };

    let wanted: HashSet<&str> = chosen.iter().map(|v| v.id.as_str()).collect();
    let mut by_id: HashMap<&str, Vec<(usize, &VcdValue)>> = HashMap::new();
    for change in &doc.changes {
        if !wanted.contains(change.id.as_str()) {
            continue;
        }
        let cycle = change.time / opts.quantum;
        if cycle >= cycles as u64 {
            continue;
        }
        by_id
            .entry(change.id.as_str())
            .or_default()
            .push((cycle as usize, &change.value));
    }

    let mut traces = TraceSet::new(cycles)?.with_timescale(doc.timescale);
    let mut warnings = Vec::new();
    let empty = Vec::new();
    for var in chosen {
        let rule = opts
            .overrides
            .iter()
            .find(|(pattern, _)| glob_match(pattern, &var.name))
            .map_or(opts.binarize, |(_, rule)| *rule);
        let history = by_id.get(var.id.as_str()).unwrap_or(&empty);
        match history.first() {
            None => warnings.push(IngestWarning(format!(
                "signal '{}' is never assigned; treated as 0",
                var.name
            ))),
            Some(&(c, _)) if c > 0 => warnings.push(IngestWarning(format!(
                "signal '{}' is unassigned before cycle {c}; treated as 0",
                var.name
            ))),
            _ => {}
        }
        let is_real = history.iter().any(|(_, v)| matches!(v, VcdValue::Real(_)));
        let outputs: Vec<(String, BitRule)> = match rule {
            Binarize::Nonzero => vec![(var.name.clone(), Box::new(|v: &VcdValue| v.is_nonzero()))],
            Binarize::Bit(_) | Binarize::Split if is_real => {
                return Err(IngestError::Binarize {
                    signal: var.name.clone(),
                    message: format!("rule {rule} needs a bit vector, signal is real-valued"),
                })
            }
            Binarize::Bit(k) => {
                if k >= var.width {
                    return Err(IngestError::Binarize {
                        signal: var.name.clone(),
                        message: format!("bit({k}) out of range for width {}", var.width),
                    });
                }
                vec![(
                    var.name.clone(),
                    Box::new(move |v: &VcdValue| v.bit(k as usize) == super::Logic::One),
                )]
            }
            Binarize::Split => (0..var.width)
                .map(|k| {
                    let f: Box<dyn Fn(&VcdValue) -> bool> =
                        Box::new(move |v: &VcdValue| v.bit(k as usize) == super::Logic::One);
                    (format!("{}[{k}]", var.name), f)
                })
                .collect(),
        };
        for (name, level) in outputs {
            let mut trace = BinTrace::zeros(cycles)?;
            let mut i = 0;
            while i < history.len() {
                let cycle = history[i].0;
                // last change within this cycle wins
                while i + 1 < history.len() && history[i + 1].0 == cycle {
                    i += 1;
                }
                let next = history.get(i + 1).map_or(cycles, |&(c, _)| c);
                if level(history[i].1) {
                    trace.fill(cycle, next, true);
                }
                i += 1;
            }
            traces.push(name, var.scope_path().map(str::to_string), trace)?;
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(Densified { traces, warnings })
}

fn id_code(mut n: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (n % 94) as u8) as char);
        n /= 94;
        if n == 0 {
            return s;
        }
        n -= 1;
    }
}

/// Writes traces as a VCD with one scalar wire per measurement, one cycle
/// per time unit. Dotted names become nested scopes.
pub fn write_vcd(traces: &TraceSet) -> String {
    let mut out = String::new();
    out.push_str("$version soclens $end\n");
    let ts = traces.timescale().map_or("1 ns".to_string(), |t| t.to_string());
    let _ = writeln!(out, "$timescale {ts} $end");
    let ids: Vec<String> = (0..traces.len()).map(id_code).collect();
    for (m, id) in traces.measurements().iter().zip(&ids) {
        let parts: Vec<&str> = m.id.name.split('.').collect();
        let (leaf, scopes) = parts.split_last().expect("split yields at least one part");
        for s in scopes {
            let _ = writeln!(out, "$scope module {s} $end");
        }
        let _ = writeln!(out, "$var wire 1 {id} {leaf} $end");
        for _ in scopes {
            out.push_str("$upscope $end\n");
        }
    }
    out.push_str("$enddefinitions $end\n#0\n$dumpvars\n");
    for (m, id) in traces.measurements().iter().zip(&ids) {
        let _ = writeln!(out, "{}{id}", u8::from(m.trace.get(0)));
    }
    out.push_str("$end\n");
    let mut events: BTreeMap<usize, Vec<(usize, bool)>> = BTreeMap::new();
    for (k, m) in traces.measurements().iter().enumerate() {
        let mut prev = m.trace.get(0);
        for t in 1..m.trace.len() {
            let cur = m.trace.get(t);
            if cur != prev {
                events.entry(t).or_default().push((k, cur));
                prev = cur;
            }
        }
    }
    for (t, list) in &events {
        let _ = writeln!(out, "#{t}");
        for &(k, v) in list {
            let _ = writeln!(out, "{}{}", u8::from(v), ids[k]);
        }
    }
    let last = traces.cycles() - 1;
    if last > 0 && events.keys().next_back() != Some(&last) {
        let _ = writeln!(out, "#{last}");
    }
    out
}
