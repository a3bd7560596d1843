//! Full-size sweep: 64 measurements, one million cycles, shifts up to 8,
//! all four implied kinds, 4096-cycle windows every 2048 cycles.
//!
//! `cargo run --release -p soclens-bench --example scale [cycles]`

use std::time::Instant;

use soclens_bench::workload;
use soclens_core::{Analyzer, GraphError, GraphParams, SweepParams};

fn main() {
    let cycles = std::env::args()
        .nth(1)
        .map_or(1_000_000, |s| s.parse().expect("cycles"));
    let started = Instant::now();
    let traces = workload(64, cycles, 1);
    let generated = started.elapsed();
    let params = GraphParams {
        delta_max: 8,
        ..Default::default()
    };
    let sweep = SweepParams {
        length: 4096,
        stride: 2048,
        alpha: 2.0,
    };
    let analyzer = Analyzer::new(&traces, params).expect("analyzer");
    let mut edges = 0;
    let windows = analyzer
        .sweep_each(&sweep, |_, g| {
            edges += g.edges.len();
            Ok::<(), GraphError>(())
        })
        .expect("sweep");
    let total = started.elapsed();
    println!(
        "{windows} windows, {edges} edges, {} threads: generate {:.2} s, total {:.2} s",
        rayon::current_num_threads(),
        generated.as_secs_f64(),
        total.as_secs_f64()
    );
}
