//! Workloads shared by the benchmarks and the scale example.

use soclens_core::synth::{gen_probsys, ChannelModel, ProbsysConfig};
use soclens_core::TraceSet;

/// `n` channels over `cycles` cycles. Densities cycle through 5 to 40 %, and
/// every fourth channel replies to its predecessor so the graph has
/// structure to find.
pub fn workload(n: usize, cycles: usize, seed: u64) -> TraceSet {
    let channels = (0..n)
        .map(|i| {
            let name = format!("m{i:03}");
            let group = format!("g{}", i / 8);
            if i % 4 == 3 {
                ChannelModel::reply(&name, &group, &format!("m{:03}", i - 1), 1 + i % 7)
            } else {
                ChannelModel::request(&name, &group, 0.05 + 0.05 * (i % 8) as f64, i as u64)
            }
        })
        .collect();
    let config = ProbsysConfig {
        cycles,
        seed,
        channels,
        slave: None,
    };
    gen_probsys(&config).expect("workload configuration is valid")
}
