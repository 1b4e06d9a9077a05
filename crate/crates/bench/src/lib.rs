//! Fixed workloads shared by the benchmarks.

use pwcrt_core::{generate_sets, GenSpec, MessageSet};

/// Generated sets at `utilization`, with the default generator settings.
pub fn generated(utilization: f64, count: usize, seed: u64) -> Vec<MessageSet> {
    let spec = GenSpec {
        utilization,
        n_sets: count,
        seed,
        ..GenSpec::default()
    };
    generate_sets(&spec).expect("default generator settings are feasible")
}
