use std::path::PathBuf;

use bea_harness::config::{ExperimentConfig, InitialCondition};
use bea_harness::HarnessError;
use proptest::prelude::*;

fn configs() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_round_trip() {
    let files = configs();
    assert!(files.len() >= 5);
    for f in files {
        let cfg = ExperimentConfig::load(&f).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", f.display());
        assert_eq!(cfg.hash().unwrap(), again.hash().unwrap());
    }
}

#[test]
fn hash_ignores_output_dir_but_not_physics() {
    let f = &configs()[0];
    let cfg = ExperimentConfig::load(f).unwrap();
    let mut moved = cfg.clone();
    moved.output.dir = PathBuf::from("elsewhere");
    assert_eq!(cfg.hash().unwrap(), moved.hash().unwrap());
    let mut other = cfg.clone();
    other.run.t_final *= 2.0;
    assert_ne!(cfg.hash().unwrap(), other.hash().unwrap());
}

const BASE: &str = r#"
[model]
name = "nls"
lambda = 1.0
sigma = 1
band = 8

[method]
tableau = "midpoint"

[run]
h = [0.1, 0.05]
t_final = 1.0

[run.initial]
kind = "gevrey_decay"
tau = 1.0
amplitude = 1.0
seed = 3
"#;

fn config_error(text: &str) -> bool {
    matches!(ExperimentConfig::from_toml(text), Err(HarnessError::Config(_)))
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(ExperimentConfig::from_toml(BASE).is_ok());
    assert!(config_error(&BASE.replace("band = 8", "band = 8\nbogus = 1")));
    assert!(config_error(&BASE.replace("h = [0.1, 0.05]", "h = [0.1, 0.2, 0.05]")));
    assert!(config_error(&BASE.replace("h = [0.1, 0.05]", "h = [-0.1]")));
    assert!(config_error(&BASE.replace("t_final = 1.0", "t_final = 0.0")));
    assert!(config_error(&BASE.replace("\"midpoint\"", "\"rk4\"")));
    assert!(config_error(&BASE.replace(
        "h = [0.1, 0.05]",
        "h = [0.1]\nh_range = { start = 0.1, ratio = 0.5, count = 3 }"
    )));
    assert!(config_error(&format!("{BASE}\n[bea]\nn = [9]\n")));
    assert!(config_error(&format!("{BASE}\n[bea]\nm = [100]\n")));
    assert!(config_error(&format!("{BASE}\n[output]\nformats = [\"parquet\"]\n")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edited_configs_round_trip(
        mut hs in prop::collection::vec(1e-4f64..1.0, 1..6),
        t_final in 1e-3f64..50.0,
        seed in 0u64..=i64::MAX as u64,
        amplitude in 1e-3f64..2.0,
        tau in 0.05f64..3.0,
        stage_tol in 1e-16f64..1e-6,
    ) {
        hs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        hs.dedup();
        let mut cfg = ExperimentConfig::from_toml(BASE).unwrap();
        cfg.run.h = Some(hs);
        cfg.run.t_final = t_final;
        cfg.method.stage_tol = stage_tol;
        cfg.run.initial = InitialCondition::GevreyDecay { tau, ell: 0.5, amplitude, seed };
        cfg.set_seed(seed);
        let text = cfg.to_toml().unwrap();
        let again = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(again.to_toml().unwrap(), text);
    }
}
