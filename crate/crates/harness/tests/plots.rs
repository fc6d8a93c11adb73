use bea_harness::plots::emit_plots;

#[test]
fn empty_csv_gets_a_warning_script() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("drift.csv");
    std::fs::write(&csv, "h,t,H_drift,H_tilde_drift\n").unwrap();
    let scripts = emit_plots(&[csv], dir.path()).unwrap();
    let text = std::fs::read_to_string(&scripts[0]).unwrap();
    assert!(scripts[0].ends_with("plot_drift.py"));
    assert!(text.contains("WARNING: drift.csv contains no data rows"));
    assert!(!text.contains("savefig"));
}

#[test]
fn scripts_reference_their_csv_and_png() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    let csv = data.join("converge.csv");
    std::fs::write(&csv, "h,error,tableau,n\n0.1,1e-3,gauss2,NA\n0.05,6.25e-5,gauss2,NA\n").unwrap();
    let out = dir.path().join("figs");
    let scripts = emit_plots(&[csv], &out).unwrap();
    let text = std::fs::read_to_string(&scripts[0]).unwrap();
    assert!(text.contains("load(\"../data/converge.csv\")"), "{text}");
    assert!(text.contains("converge.png"));
    assert!(text.contains("loglog"));
    // order-4 guide from the tableau column
    assert!(text.contains("((4, \":\")"), "{text}");
}
