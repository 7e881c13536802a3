#![allow(dead_code)]

use fdzf::SimulationConfig;

/// Default scenario at a size that runs in well under a second.
pub fn small_config() -> SimulationConfig {
    let mut cfg = SimulationConfig {
        n_drops: 12,
        n_realizations_per_drop: 20,
        ..Default::default()
    };
    cfg.ns_accuracy.m_values = vec![10, 32];
    cfg.ns_accuracy.n_drops = 8;
    cfg.ns_accuracy.n_realizations_per_drop = 4;
    cfg.oracle.n_realizations = 2_000;
    cfg
}

pub fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}
