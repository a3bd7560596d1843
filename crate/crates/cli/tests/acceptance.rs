//! Acceptance gate: prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Criteria run one after another so the timed ones
//! are not competing for cores.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use oracle::{Kind, KINDS};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use soclens_core::export::GraphDocument;
use soclens_core::measures::{cond_expectation, expectation};
use soclens_core::synth::{gen_probsys, ProbsysConfig};
use soclens_core::{
    build_graph, map2d, pair_metrics, window_sweep, window_weights, Analyzer, BehaviourGraph, BinTrace, GraphError,
    GraphParams, ImpliedKind, Rgb8, SweepParams, Thresholds, TraceSet,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn kind(k: Kind) -> ImpliedKind {
    match k {
        Kind::Level => ImpliedKind::Level,
        Kind::Reflect => ImpliedKind::Reflect,
        Kind::Rise => ImpliedKind::Rise,
        Kind::Fall => ImpliedKind::Fall,
    }
}

fn random_bits(rng: &mut Xoshiro256StarStar, len: usize) -> Vec<u8> {
    let p: f64 = rng.random_range(0.02..0.98);
    (0..len).map(|_| rng.random_bool(p) as u8).collect()
}

fn bin(bits: &[u8]) -> BinTrace {
    BinTrace::from_bits(bits).unwrap()
}

fn trace<'a>(s: &'a TraceSet, name: &str) -> &'a BinTrace {
    &s.get(name).unwrap_or_else(|| panic!("fixture has no {name}")).trace
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

struct OracleRun {
    pairs: usize,
    comparisons: usize,
    max_err: f64,
    mismatch: Option<String>,
    raw_cov: (f64, f64),
    packed_raw_cov: (f64, f64),
    dep: (f64, f64),
    cov: (f64, f64),
    elapsed: Duration,
}

fn widen(r: &mut (f64, f64), v: f64) {
    r.0 = r.0.min(v);
    r.1 = r.1.max(v);
}

fn oracle_run() -> OracleRun {
    let started = Instant::now();
    let mut rng = Xoshiro256StarStar::seed_from_u64(1000);
    let mut run = OracleRun {
        pairs: 1000,
        comparisons: 0,
        max_err: 0.0,
        mismatch: None,
        raw_cov: (f64::INFINITY, f64::NEG_INFINITY),
        packed_raw_cov: (f64::INFINITY, f64::NEG_INFINITY),
        dep: (f64::INFINITY, f64::NEG_INFINITY),
        cov: (f64::INFINITY, f64::NEG_INFINITY),
        elapsed: Duration::ZERO,
    };
    for pair in 0..run.pairs {
        let len = rng.random_range(3..=256);
        let (xb, yb) = (random_bits(&mut rng, len), random_bits(&mut rng, len));
        let u = rng.random_range(0..=len - 3);
        let v = rng.random_range(u + 3..=len);
        let (x, y) = (bin(&xb), bin(&yb));
        for alpha in [0.0, 1.0, 2.0, 4.0] {
            let window = window_weights(u, v, alpha).unwrap();
            for kx in KINDS {
                let ix = x.implied(kind(kx));
                for ky in KINDS {
                    let iy = y.implied(kind(ky));
                    for delta in -8i64..=8 {
                        let o = oracle::pair(&xb, kx, &yb, ky, u, v, alpha, delta);
                        let m = pair_metrics(&ix, &iy, &window, delta);
                        widen(&mut run.raw_cov, o.raw_cov);
                        widen(&mut run.packed_raw_cov, m.ex_xy - m.ex_x * m.ex_y);
                        widen(&mut run.dep, m.dep);
                        widen(&mut run.cov, m.cov);
                        let cond = match (cond_expectation(m.ex_xy, m.ex_y), o.cond_ex) {
                            (Some(a), Some(b)) => (a - b).abs(),
                            (None, None) => 0.0,
                            _ => f64::INFINITY,
                        };
                        let errs = [
                            ("E[x]", (expectation(&ix, &window, 0) - o.ex_x).abs()),
                            ("E[y]", (expectation(&iy, &window, delta) - o.ex_y).abs()),
                            ("E[xy]", (m.ex_xy - o.ex_xy).abs()),
                            ("E[x|y]", cond),
                            ("sDep", (m.dep - o.dep).abs()),
                            ("sCov", (m.cov - o.cov).abs()),
                        ];
                        for (what, e) in errs {
                            run.comparisons += 1;
                            run.max_err = run.max_err.max(e);
                            if e > 1e-9 && run.mismatch.is_none() {
                                run.mismatch = Some(format!(
                                    "pair {pair} {what} {kx:?}/{ky:?} alpha {alpha} delta {delta} error {e:e}"
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    run.elapsed = started.elapsed();
    run
}

fn oracle_equivalence(run: &OracleRun) -> Outcome {
    if let Some(m) = &run.mismatch {
        return Err(m.clone());
    }
    ensure(run.elapsed < Duration::from_secs(30), || {
        format!("took {:.1} s, limit 30 s", secs(run.elapsed))
    })?;
    Ok(format!(
        "{} pairs, {} comparisons, max error {:.1e} <= 1e-9, {:.1} s < 30 s",
        run.pairs,
        run.comparisons,
        run.max_err,
        secs(run.elapsed)
    ))
}

/// ±1/4 is attained exactly (complementary halves of equal weight), and
/// f64 weight sums can land a rounding step beyond it. The bound is checked
/// with that much slack and the actual excess is reported.
const ROUNDING: f64 = 1e-12;

fn excess(r: (f64, f64)) -> f64 {
    (-0.25 - r.0).max(r.1 - 0.25).max(0.0)
}

fn codomain(run: &OracleRun) -> Outcome {
    let inside = |r: (f64, f64), lo: f64, hi: f64| r.0 >= lo && r.1 <= hi;
    for (what, r) in [("oracle", run.raw_cov), ("packed", run.packed_raw_cov)] {
        ensure(inside(r, -0.25 - ROUNDING, 0.25 + ROUNDING), || {
            format!("{what} raw covariance spans [{}, {}]", r.0, r.1)
        })?;
    }
    ensure(inside(run.dep, 0.0, 1.0), || {
        format!("sDep spans [{}, {}]", run.dep.0, run.dep.1)
    })?;
    ensure(inside(run.cov, 0.0, 1.0), || {
        format!("sCov spans [{}, {}]", run.cov.0, run.cov.1)
    })?;
    Ok(format!(
        "raw cov in [{:.4}, {:.4}] (excess past 1/4: oracle {:.1e}, packed {:.1e}; allowance {ROUNDING:.0e}), \
         sDep in [{:.3}, {:.3}], sCov in [{:.3}, {:.3}]",
        run.raw_cov.0,
        run.raw_cov.1,
        excess(run.raw_cov),
        excess(run.packed_raw_cov),
        run.dep.0,
        run.dep.1,
        run.cov.0,
        run.cov.1
    ))
}

fn symmetry() -> Outcome {
    let mut rng = Xoshiro256StarStar::seed_from_u64(3);
    let mut checked = 0;
    for pair in 0..100 {
        let len = rng.random_range(3..=1024);
        let (x, y) = (bin(&random_bits(&mut rng, len)), bin(&random_bits(&mut rng, len)));
        let u = rng.random_range(0..=len - 3);
        let v = rng.random_range(u + 3..=len);
        let alpha = [0.0, 1.0, 2.0, 4.0][pair % 4];
        let window = window_weights(u, v, alpha).unwrap();
        for kx in ImpliedKind::ALL {
            for ky in ImpliedKind::ALL {
                let (ix, iy) = (x.implied(kx), y.implied(ky));
                let xy = pair_metrics(&ix, &iy, &window, 0);
                let yx = pair_metrics(&iy, &ix, &window, 0);
                ensure(
                    xy.dep.to_bits() == yx.dep.to_bits() && xy.cov.to_bits() == yx.cov.to_bits(),
                    || {
                        format!(
                            "pair {pair} {kx}/{ky}: ({}, {}) vs ({}, {})",
                            xy.dep, xy.cov, yx.dep, yx.cov
                        )
                    },
                )?;
                checked += 1;
            }
        }
    }
    Ok(format!("100 pairs, {checked} kind combinations, bitwise equal"))
}

fn latency_recovery() -> Outcome {
    let started = Instant::now();
    let traces = gen_probsys(&ProbsysConfig::axi()).map_err(|e| e.to_string())?;
    let window = window_weights(4096, 4608, 2.0).unwrap();
    let params = GraphParams::default();
    let graph = build_graph(&traces, &window, &params).map_err(|e| e.to_string())?;
    let mut found = Vec::new();
    for (request, reply) in [("read.AR", "read.R"), ("write.W", "write.B")] {
        let (x, y) = (trace(&traces, request), trace(&traces, reply));
        let best = (-16i64..=16)
            .map(|d| (d, pair_metrics(x, y, &window, d).strength()))
            .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        ensure(best.0 == 5, || {
            format!("{request}/{reply}: argmax delta {} not 5", best.0)
        })?;
        let edge = graph.edges.iter().find(|e| {
            graph.nodes[e.src.node].id.name == request
                && graph.nodes[e.dst.node].id.name == reply
                && e.src.kind == ImpliedKind::Level
                && e.dst.kind == ImpliedKind::Level
        });
        let edge = edge.ok_or_else(|| format!("no Level->Level edge {request} -> {reply}"))?;
        ensure(edge.delta == 5, || {
            format!("{request} -> {reply} edge at delta {}", edge.delta)
        })?;
        found.push(format!(
            "{request}->{reply} delta 5 (dep {:.3}, cov {:.3})",
            edge.dep(),
            edge.cov()
        ));
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {:.1} s, limit 10 s", secs(elapsed))
    })?;
    Ok(format!(
        "window [4096, 4608): {}, {:.2} s < 10 s",
        found.join(", "),
        secs(elapsed)
    ))
}

fn group(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

fn cross_group(g: &BehaviourGraph) -> impl Iterator<Item = &soclens_core::Edge> {
    g.edges.iter().filter(|e| {
        let (a, b) = (group(&g.nodes[e.src.node].id.name), group(&g.nodes[e.dst.node].id.name));
        matches!((a, b), ("read", "write") | ("write", "read"))
    })
}

fn cluster_separation() -> Outcome {
    let started = Instant::now();
    let traces = gen_probsys(&ProbsysConfig::axi()).map_err(|e| e.to_string())?;
    let sweep = SweepParams::with_length(512);
    let params = GraphParams {
        thresholds: Thresholds::new(0.05, 0.05).unwrap(),
        ..Default::default()
    };
    let graphs = window_sweep(&traces, &sweep, &params).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let cross: usize = graphs.iter().map(|g| cross_group(g).count()).sum();
    ensure(cross == 0, || format!("{cross} read/write edges"))?;
    let mut present = Vec::new();
    for (request, reply) in [("write.AW", "write.W"), ("write.W", "write.B"), ("read.AR", "read.R")] {
        let windows = graphs
            .iter()
            .filter(|g| {
                g.edges.iter().any(|e| {
                    let (a, b) = (&g.nodes[e.src.node].id.name, &g.nodes[e.dst.node].id.name);
                    (a == request && b == reply) || (a == reply && b == request)
                })
            })
            .count();
        ensure(windows > 0, || format!("no {request}/{reply} edge in any window"))?;
        present.push(format!("{request}/{reply} {windows}/{}", graphs.len()));
    }
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {:.1} s, limit 10 s", secs(elapsed))
    })?;

    // margin: strongest cross-group covariance with no threshold at all
    let open = window_sweep(&traces, &sweep, &GraphParams::default()).map_err(|e| e.to_string())?;
    let margin = open.iter().flat_map(cross_group).map(|e| e.cov()).fold(0.0, f64::max);
    Ok(format!(
        "{} windows, 0 cross-group edges, intra-group windows {}; max unthresholded cross-group cov {:.3}, {:.2} s < 10 s",
        graphs.len(),
        present.join(", "),
        margin,
        secs(elapsed)
    ))
}

fn busy_idle() -> Outcome {
    let traces = gen_probsys(&ProbsysConfig::axi()).map_err(|e| e.to_string())?;
    let (busy, idle) = (trace(&traces, "slave.busy"), trace(&traces, "slave.idle"));
    ensure(busy.words().iter().zip(idle.words()).all(|(a, b)| a & b == 0), || {
        "busy and idle overlap".into()
    })?;
    let graphs =
        window_sweep(&traces, &SweepParams::with_length(512), &GraphParams::default()).map_err(|e| e.to_string())?;
    let mut linked = 0;
    for g in &graphs {
        let m = pair_metrics(busy, idle, &g.window, 0);
        ensure(m.ex_xy == 0.0 && m.dep == 0.0, || {
            format!(
                "window [{}, {}): ex_xy {} dep {}",
                g.window.start(),
                g.window.end(),
                m.ex_xy,
                m.dep
            )
        })?;
        let is =
            |e: &soclens_core::Endpoint, name: &str, k: ImpliedKind| g.nodes[e.node].id.name == name && e.kind == k;
        let edge = g.edges.iter().find(|e| {
            (is(&e.src, "slave.busy", ImpliedKind::Level) && is(&e.dst, "slave.idle", ImpliedKind::Reflect))
                || (is(&e.src, "slave.idle", ImpliedKind::Reflect) && is(&e.dst, "slave.busy", ImpliedKind::Level))
        });
        let edge =
            edge.ok_or_else(|| format!("window [{}, {}): no busy/idle~ edge", g.window.start(), g.window.end()))?;
        ensure(edge.dep() > 0.0 && edge.cov() > 0.0, || "edge not significant".into())?;
        linked += 1;
    }
    Ok(format!(
        "{} windows: busy.idle ex_xy = 0 and dep = 0 in all; busy/idle~ edge significant in {linked}",
        graphs.len()
    ))
}

fn colourspace() -> Outcome {
    for gamma in [0.5, 1.0, 2.0] {
        ensure(map2d(0.0, 0.0, gamma).unwrap() == Rgb8::WHITE, || {
            format!("(0,0) gamma {gamma}")
        })?;
        ensure(map2d(1.0, 1.0, gamma).unwrap() == Rgb8::BLACK, || {
            format!("(1,1) gamma {gamma}")
        })?;
    }
    for i in 0..64 {
        let t = i as f64 / 63.0;
        let c = map2d(t, t, 1.0).unwrap();
        ensure(c.green == c.blue, || format!("diagonal {t}: {c}"))?;
    }
    for i in 0..256 {
        for j in 0..256 {
            let (a, b) = (i as f64 / 255.0, j as f64 / 255.0);
            let c = map2d(a, b, 1.0).map_err(|e| e.to_string())?;
            let ok =
                c.red >= c.green && c.red >= c.blue && (a <= b || c.green <= c.blue) && (a >= b || c.blue <= c.green);
            ensure(ok, || format!("({a}, {b}) -> {c}"))?;
        }
    }
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/map2d_reference.csv");
    let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| f[i].parse::<f64>().unwrap();
        let want = Rgb8 {
            red: f[3].parse().unwrap(),
            green: f[4].parse().unwrap(),
            blue: f[5].parse().unwrap(),
        };
        let got = map2d(num(0), num(1), num(2)).unwrap();
        ensure(got == want, || format!("{line}: got {got}"))?;
        rows += 1;
    }
    Ok(format!(
        "corners exact, 64-point diagonal grey, 65536-point grid ordered, {rows} high-precision rows bit-exact"
    ))
}

fn window_properties() -> Outcome {
    let mut rng = Xoshiro256StarStar::seed_from_u64(8);
    let mut worst_sym: f64 = 0.0;
    let mut worst_reflect: f64 = 0.0;
    for case in 0..500 {
        let n = rng.random_range(3..=5000);
        let alpha = [0.0, 0.5, 1.0, 2.0, 4.0][case % 5];
        let w = window_weights(100, 100 + n, alpha).unwrap();
        let ws = w.weights();
        for k in 0..n {
            worst_sym = worst_sym.max((ws[k] - ws[n - 1 - k]).abs());
        }
        let peak = ws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ensure(ws[(n - 1) / 2] == peak && ws[n / 2] == peak, || {
            format!("n {n} alpha {alpha}: peak not at centre")
        })?;

        let len = rng.random_range(3..=4096);
        let f = bin(&random_bits(&mut rng, len));
        let u = rng.random_range(0..=len - 3);
        let v = rng.random_range(u + 3..=len);
        let window = window_weights(u, v, alpha).unwrap();
        let sum = expectation(&f, &window, 0) + expectation(&f.implied(ImpliedKind::Reflect), &window, 0);
        worst_reflect = worst_reflect.max((sum - 1.0).abs());
    }
    ensure(worst_sym <= 1e-12, || format!("symmetry error {worst_sym:e}"))?;
    ensure(worst_reflect <= 1e-12, || format!("reflection error {worst_reflect:e}"))?;
    Ok(format!(
        "500 windows: symmetry error {worst_sym:.1e}, peak at centre, reflection error {worst_reflect:.1e} (<= 1e-12)"
    ))
}

fn edge_balance() -> Outcome {
    let mut rng = Xoshiro256StarStar::seed_from_u64(9);
    let mut worst = 0;
    for i in 0..1000 {
        let len = rng.random_range(1..=3000);
        let bits = match i % 10 {
            0 => vec![0; len],
            1 => vec![1; len],
            _ => random_bits(&mut rng, len),
        };
        let t = bin(&bits);
        let rise = t.implied(ImpliedKind::Rise).count_ones() as i64;
        let fall = t.implied(ImpliedKind::Fall).count_ones() as i64;
        worst = worst.max((rise - fall).abs());
        ensure((rise - fall).abs() <= 1, || {
            format!("trace {i}: {rise} rises, {fall} falls")
        })?;
    }
    Ok(format!("1000 traces, max |rises - falls| = {worst}"))
}

fn run_tinn(out: &Path, threads: &str) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_soclens"))
        .args(["--input", "builtin:tinn", "--format", "fixture", "--out"])
        .arg(out)
        .env("SOCLENS_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    run_tinn(a, "1")?;
    run_tinn(b, "4")?;
    let (fa, fb) = (artifacts(a), artifacts(b));
    let svgs = fa.keys().filter(|n| n.ends_with(".svg")).count();
    ensure(svgs > 0 && fa.contains_key("graphs.json"), || {
        "missing artifacts".into()
    })?;
    ensure(fa.keys().eq(fb.keys()), || "file lists differ".into())?;
    for (name, bytes) in &fa {
        ensure(&fb[name] == bytes, || format!("{name} differs"))?;
    }
    let total: usize = fa.values().map(Vec::len).sum();
    Ok(format!(
        "{} files ({svgs} SVG frames, index, graph JSON; {total} bytes) identical across 1- and 4-thread runs",
        fa.len()
    ))
}

fn train_to_infer(dir: &Path) -> Outcome {
    let text = fs::read_to_string(dir.join("graphs.json")).map_err(|e| e.to_string())?;
    let doc = GraphDocument::from_json(&text).map_err(|e| e.to_string())?;
    let half = doc.cycles / 2;
    let train = |w: &soclens_core::export::WindowDoc| {
        w.nodes
            .iter()
            .find(|n| n.name == "SCPU.train")
            .map(|n| n.ex_window.level)
    };
    let (mut p1, mut p2) = (Vec::new(), Vec::new());
    for w in &doc.windows {
        let level = train(w).ok_or("no SCPU.train node")?;
        if w.v <= half {
            p1.push(level);
        } else if w.u >= half {
            p2.push(level);
        }
    }
    ensure(!p1.is_empty() && !p2.is_empty(), || "a phase has no windows".into())?;
    let min1 = p1.iter().cloned().fold(f64::INFINITY, f64::min);
    let max2 = p2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ensure(min1 > 0.6, || format!("phase 1 minimum {min1}"))?;
    ensure(max2 < 0.1, || format!("phase 2 maximum {max2}"))?;
    let edges = |w: &soclens_core::export::WindowDoc| w.edges.iter().map(|e| e.key()).collect::<BTreeSet<_>>();
    let (first, last) = (edges(&doc.windows[0]), edges(doc.windows.last().unwrap()));
    ensure(first != last, || "first and last frames have the same edges".into())?;
    Ok(format!(
        "SCPU.train level min {min1:.3} over {} phase-1 windows, max {max2:.3} over {} phase-2 windows; \
         first/last frames differ in {} edges",
        p1.len(),
        p2.len(),
        first.symmetric_difference(&last).count()
    ))
}

fn scale() -> Outcome {
    let started = Instant::now();
    let traces = soclens_bench::workload(64, 1_000_000, 1);
    let params = GraphParams {
        delta_max: 8,
        ..Default::default()
    };
    let sweep = SweepParams {
        length: 4096,
        stride: 2048,
        alpha: 2.0,
    };
    let analyzer = Analyzer::new(&traces, params).map_err(|e| e.to_string())?;
    let mut edges = 0;
    let windows = analyzer
        .sweep_each(&sweep, |_, g| {
            edges += g.edges.len();
            Ok::<(), GraphError>(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(300), || {
        format!("took {:.1} s, limit 300 s", secs(elapsed))
    })?;
    Ok(format!(
        "64 x 1,000,000 cycles, D = 8, 4 kinds: {windows} windows, {edges} edges in {:.1} s on {} thread(s) (< 300 s)",
        secs(elapsed),
        rayon::current_num_threads()
    ))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
        Err(detail) => {
            failed += 1;
            println!("FAIL {n:>2} {name}: {detail}");
        }
    };

    let run = oracle_run();
    report(1, "oracle equivalence", oracle_equivalence(&run));
    report(2, "covariance bound and codomain", codomain(&run));
    report(3, "symmetry at zero shift", symmetry());
    report(4, "latency recovery", latency_recovery());
    report(5, "cluster separation", cluster_separation());
    report(6, "busy/idle exclusion", busy_idle());
    report(7, "colourspace", colourspace());
    report(8, "window properties", window_properties());
    report(9, "edge balance", edge_balance());
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    report(10, "determinism", determinism(a.path(), b.path()));
    report(11, "train to infer transition", train_to_infer(a.path()));
    report(12, "scale", scale());

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 12 acceptance criteria passed");
}
