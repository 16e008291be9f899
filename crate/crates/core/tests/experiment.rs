use expsum_core::experiment::{
    parse_config, run_experiment, write_csv, write_json, ExperimentRecord,
};

#[test]
fn single_cell_record() {
    let c = parse_config(r#"{"p":101,"k":[1]}"#).unwrap();
    let r = run_experiment(&c).unwrap();
    assert_eq!(r.cells.len(), 1);
    let report = r.cells[0].report.as_ref().unwrap();
    assert_eq!((report.size_x, report.size_y), (100, 100));
    assert!(report.exact > 0.0 && report.exact <= 10_000.0);
}

#[test]
fn grid_cardinality() {
    let c = parse_config(r#"{"p":101,"k":[2],"sweep":{"p":[101,211,499],"densities":[0.5,0.8]}}"#)
        .unwrap();
    let r = run_experiment(&c).unwrap();
    assert_eq!(r.cells.len(), 6);
    let ps: Vec<u64> = r.cells.iter().map(|c| c.p).collect();
    assert_eq!(ps, vec![101, 101, 211, 211, 499, 499]);
}

#[test]
fn empty_x_gives_zero() {
    let c = parse_config(r#"{"p":101,"x":{"list":[]}}"#).unwrap();
    let r = run_experiment(&c).unwrap();
    for cell in &r.cells {
        let report = cell.report.as_ref().unwrap();
        assert_eq!(report.exact, 0.0);
        assert!(report.ratios.values().all(|&v| v == 0.0));
    }
}

#[test]
fn record_is_rerunnable_from_its_snapshot() {
    let c = parse_config(
        r#"{"p":211,"T":35,"gamma":{"random":{"seed":8}},"y":{"random":{"size":50,"seed":2}}}"#,
    )
    .unwrap();
    let first = run_experiment(&c).unwrap();
    let again = run_experiment(&first.config).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_csv(&first, &mut a).unwrap();
    write_csv(&again, &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(first.config, c);
}

#[test]
fn json_record_round_trip() {
    let c = parse_config(r#"{"p":101,"sweep":{"T":["max",4,25]},"seed":1}"#).unwrap();
    let r = run_experiment(&c).unwrap();
    let mut buf = Vec::new();
    write_json(&r, &mut buf).unwrap();
    let back: ExperimentRecord = serde_json::from_slice(&buf).unwrap();
    assert_eq!(back, r);
}
