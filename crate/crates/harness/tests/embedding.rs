//! Embedding defect orders for a symmetric method.
//!
//! With f^j = 0 for even j the defect `‖Ψ^h(U) − Φ̃^h(U)‖` after truncating
//! at n is O(h^{n+2}) for odd n and O(h^{n+1}) for even n. Either way it is
//! at least O(h^{n+1}).

use std::path::PathBuf;

use bea_harness::config::ExperimentConfig;
use bea_harness::experiments::{run_bea_verify, summary_value, Setup};

#[test]
fn embedding_defect_orders_for_midpoint() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/wave_bea.toml");
    let s = Setup::new(ExperimentConfig::load(&path).unwrap(), false).unwrap();
    let rep = run_bea_verify(&s).unwrap();
    for n in 1..=5usize {
        let slope = summary_value(&rep.summary, "embedding_slope", Some(n)).unwrap();
        let expect = if n % 2 == 1 { n + 2 } else { n + 1 } as f64;
        assert!((slope - expect).abs() <= 0.3, "n = {n}: slope {slope}, expected {expect}");
        assert!(slope >= (n + 1) as f64 - 0.3);
    }
}
