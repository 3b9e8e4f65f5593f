//! End-to-end runs: artifacts, comparison, scenario loading.

use std::collections::BTreeMap;
use std::path::Path;

use sdwan_core::experiment::{compare_modes, run_experiment, MetricsRow};
use sdwan_core::report::{percentile_nearest_rank, E2eSample, RunReport};
use sdwan_core::scenario::{builtin, load_scenario, parse_scenario, PolicyMode};
use sdwan_core::ScenarioError;

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path).unwrap().deserialize().map(Result::unwrap).collect()
}

fn read_report(dir: &Path) -> RunReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn report_is_reproducible_from_the_csv_artifacts() {
    let sc = builtin("sdwan_mix").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let report = run_experiment(&sc, PolicyMode::MluQos, 3, 300, tmp.path()).unwrap();
    assert_eq!(read_report(tmp.path()), report);

    let samples: Vec<E2eSample> = read_csv(&tmp.path().join("e2e.csv"));
    for g in &report.groups {
        let d: Vec<f64> = samples.iter().filter(|s| s.group == g.group).map(|s| s.delay_ms).collect();
        let ok = d.iter().filter(|&&x| x <= g.sla_ms).count();
        assert_eq!(g.sla_satisfaction_pct, 100.0 * ok as f64 / d.len() as f64, "{}", g.group);
        assert_eq!(g.avg_delay_ms, d.iter().sum::<f64>() / d.len() as f64);
        assert_eq!(Some(g.p95_delay_ms), percentile_nearest_rank(&d, 95.0));
    }

    let rows: Vec<MetricsRow> = read_csv(&tmp.path().join("metrics.csv"));
    let mut mlu: BTreeMap<u64, f64> = BTreeMap::new();
    for r in &rows {
        let e = mlu.entry(r.epoch).or_insert(0.0);
        *e = e.max(r.utilization);
        assert!((0.0..=1.0).contains(&r.loss));
    }
    assert_eq!(mlu.into_values().collect::<Vec<_>>(), report.mlu);
    // Fixed-point accounting rounds each tick to 1e-9 Mbit.
    assert!(report.delivered_mbit <= report.offered_mbit + 1e-6);

    let log = std::fs::read_to_string(tmp.path().join("policy_log.jsonl")).unwrap();
    assert!(log.lines().count() > 0);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["loop"] == "spr" || v["loop"] == "qos", "{line}");
    }
}

#[test]
fn comparison_of_one_seed_matches_a_single_run() {
    let sc = builtin("mstp_only").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let cmp = compare_modes(&sc, &[PolicyMode::AllTns, PolicyMode::Mlu], &[5], 120, tmp.path()).unwrap();
    assert!(cmp.failures.is_empty());
    let solo = run_experiment(&sc, PolicyMode::Mlu, 5, 120, &tmp.path().join("solo")).unwrap();
    let from_cmp = cmp.reports.iter().find(|r| r.mode == PolicyMode::Mlu).unwrap();
    assert_eq!(from_cmp, &solo);
    for (row, g) in cmp.rows.iter().zip(&solo.groups) {
        let cell = row.cells[1].as_ref().unwrap();
        assert_eq!(cell.sla_satisfaction_pct, g.sla_satisfaction_pct);
        assert_eq!(cell.p95_delay_ms, g.p95_delay_ms);
    }
    let csv = std::fs::read_to_string(tmp.path().join("comparison.csv")).unwrap();
    assert!(csv.starts_with("group,all-tns_satisfaction_pct,"));
    assert_eq!(csv.lines().count(), 1 + sc.flow_groups.len());
    assert!(tmp.path().join("all-tns-seed5/report.json").exists());
}

#[test]
fn seeds_change_the_trace_but_not_determinism() {
    let sc = builtin("sdwan_mix").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let a = run_experiment(&sc, PolicyMode::AllTns, 1, 120, &tmp.path().join("a")).unwrap();
    let b = run_experiment(&sc, PolicyMode::AllTns, 1, 120, &tmp.path().join("b")).unwrap();
    let c = run_experiment(&sc, PolicyMode::AllTns, 2, 120, &tmp.path().join("c")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.offered_mbit, c.offered_mbit);
}

#[test]
fn scenario_loading_errors() {
    assert!(matches!(load_scenario("builtin:nope"), Err(ScenarioError::UnknownBuiltin(_))));
    assert!(matches!(load_scenario("/nonexistent/x.json"), Err(ScenarioError::Io { .. })));

    let text = include_str!("../scenarios/mstp_only.json");
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["schema_version"] = 99.into();
    assert!(matches!(parse_scenario(&v.to_string()), Err(ScenarioError::UnsupportedVersion(99))));

    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["topology"]["links"][0]["capacity_mbps"] = "fast".into();
    match parse_scenario(&v.to_string()) {
        Err(ScenarioError::Parse { field, .. }) => assert!(field.contains("capacity_mbps"), "{field}"),
        other => panic!("{other:?}"),
    }

    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["topology"]["links"][0]["capacity_mbps"] = (-1.0).into();
    assert!(matches!(parse_scenario(&v.to_string()), Err(ScenarioError::Invalid(_))));
}
