use fdzf::config::{BetaMode, ConfigError, Scenario};
use fdzf::{load_config, SimulationConfig};
use std::io::Write;
use std::path::Path;

#[test]
fn defaults_round_trip_through_toml() {
    let cfg = SimulationConfig::default();
    let text = cfg.to_toml_string();
    let back = SimulationConfig::from_toml_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn edited_config_round_trips_through_file() {
    let mut cfg = SimulationConfig {
        seed: u64::MAX,
        beta_mode: BetaMode::LinkBudget,
        operating_snr_db: vec![0.1, 7.25],
        ..Default::default()
    };
    cfg.sweep.se_scenarios = vec![Scenario {
        name: Some("pair".into()),
        az_separation_deg: 0.0,
        el_separation_deg: 0.0,
        ues: Some(
            [(0.0, 100.0), (12.5, 95.0), (40.0, 110.0), (-20.0, 120.0)]
                .iter()
                .map(|&(az_deg, el_deg)| fdzf::config::UeAngles { az_deg, el_deg })
                .collect(),
        ),
    }];
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(cfg.to_toml_string().as_bytes()).unwrap();
    assert_eq!(load_config(file.path()).unwrap(), cfg);
}

#[test]
fn hash_tracks_content() {
    let a = SimulationConfig::default();
    let mut b = a.clone();
    b.n_paths = 21;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn misspelled_key_is_named() {
    for (text, key, line) in [
        ("n_drop = 10\n", "n_drop", 1),
        ("seed = 2\n\n[geometry]\nm_xx = 4\n", "m_xx", 4),
        ("[ns_accuracy]\nm_value = [10]\n", "m_value", 2),
    ] {
        match SimulationConfig::from_toml_str(text) {
            Err(e @ ConfigError::Parse { .. }) => {
                let ConfigError::Parse { key: k, line: l, .. } = &e else { unreachable!() };
                assert_eq!(k.as_deref(), Some(key), "{text}");
                assert_eq!(*l, Some(line), "{text}");
                assert!(e.to_string().contains(key));
            }
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn type_errors_are_parse_errors() {
    let err = SimulationConfig::from_toml_str("n_ues = \"four\"\n").unwrap_err();
    assert!(matches!(err, ConfigError::Parse { line: Some(1), .. }), "{err:?}");
}

#[test]
fn missing_file_is_io_error() {
    let err = load_config(std::path::Path::new("/definitely/not/here.toml")).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
}

#[test]
fn shipped_default_config_matches_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(load_config(&path).unwrap(), SimulationConfig::default());
}
