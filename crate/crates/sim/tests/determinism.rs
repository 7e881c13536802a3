mod common;

use common::{small_config, with_threads};
use fdzf::config::Scenario;
use fdzf::experiments::evaluate_sweep_drops;
use fdzf::SimulationConfig;
use fdzf_core::stats::MeanAccumulator;

type Run = fn(&SimulationConfig) -> Result<fdzf::ResultTable, fdzf::SimError>;

const RUNS: [(&str, Run); 4] = [
    ("ns_accuracy", fdzf::run_ns_accuracy),
    ("snr_sweep", fdzf::run_snr_sweep),
    ("se_sweep", fdzf::run_se_sweep),
    ("oracle", fdzf::run_oracle),
];

#[test]
fn same_seed_same_bytes_across_thread_counts() {
    let cfg = small_config();
    for (name, run) in RUNS {
        let one = with_threads(1, || run(&cfg).unwrap().to_csv_string());
        let again = with_threads(1, || run(&cfg).unwrap().to_csv_string());
        let many = with_threads(5, || run(&cfg).unwrap().to_csv_string());
        assert_eq!(one, again, "{name}");
        assert_eq!(one, many, "{name}");
    }
}

#[test]
fn seed_changes_results() {
    let a = small_config();
    let mut b = a.clone();
    b.seed = 2;
    for (name, run) in RUNS {
        let ta = run(&a).unwrap();
        let tb = run(&b).unwrap();
        assert_ne!(ta.rows(), tb.rows(), "{name}");
        assert_ne!(ta.meta("config_sha256"), tb.meta("config_sha256"));
    }
}

#[test]
fn scenarios_share_random_numbers() {
    // identical layouts under different names give identical drops
    let cfg = small_config();
    let a = evaluate_sweep_drops(&cfg, &Scenario::separation(30.0, 15.0)).unwrap();
    let mut named = Scenario::separation(30.0, 15.0);
    named.name = Some("again".into());
    assert_eq!(a, evaluate_sweep_drops(&cfg, &named).unwrap());
}

#[test]
fn drop_count_extends_rather_than_reshuffles() {
    let mut cfg = small_config();
    let s = Scenario::separation(10.0, 15.0);
    let short = evaluate_sweep_drops(&cfg, &s).unwrap();
    cfg.n_drops *= 2;
    let long = evaluate_sweep_drops(&cfg, &s).unwrap();
    assert_eq!(short[..], long[..short.len()]);
}

/// Standard error reported from all drops against the one implied by each
/// half: `se_half / sqrt(2)` should agree within a factor of 1.5.
#[test]
fn standard_error_matches_split_halves() {
    let cfg = SimulationConfig {
        n_drops: 200,
        n_realizations_per_drop: 20,
        ..Default::default()
    };
    let drops = evaluate_sweep_drops(&cfg, &Scenario::separation(30.0, 15.0)).unwrap();
    for snr_db in [0.0, 20.0] {
        for metric in [0, 1] {
            let values: Vec<f64> = drops
                .iter()
                .map(|d| if metric == 0 { d.sim_snr(snr_db) } else { d.sim_sum_se(snr_db) })
                .collect();
            let se = |v: &[f64]| v.iter().copied().collect::<MeanAccumulator>().std_error();
            let full = se(&values);
            let (first, second) = values.split_at(values.len() / 2);
            for half in [first, second] {
                let ratio = se(half) / std::f64::consts::SQRT_2 / full;
                assert!((1.0 / 1.5..=1.5).contains(&ratio), "snr {snr_db} metric {metric}: {ratio}");
            }
            // the two half means differ by an amount consistent with the error
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            assert!((mean(first) - mean(second)).abs() < 4.0 * 2.0 * full);
        }
    }
}
