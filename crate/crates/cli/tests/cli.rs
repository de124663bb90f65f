use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn chartmut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chartmut")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sample_size() {
    let o = chartmut(&["sample-size", "--confidence", "0.95", "--margin", "0.05", "--proportion", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "246");
    let o = chartmut(&["sample-size", "--proportion", "0.5"]);
    assert_eq!(stdout(&o).trim(), "385");
    assert_eq!(chartmut(&["sample-size", "--confidence", "1.5", "--proportion", "0.2"]).status.code(), Some(1));
}

#[test]
fn validate_exit_codes() {
    assert_eq!(chartmut(&["validate", path(&corpus("fridge.chart.json"))]).status.code(), Some(0));
    assert_eq!(chartmut(&["validate", "/nonexistent/chart.json"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let mut chart: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(corpus("fridge.chart.json")).unwrap()).unwrap();
    for t in chart["transitions"].as_array_mut().unwrap() {
        if t["id"] == "T3" {
            t["dest"] = serde_json::Value::Null;
        }
    }
    let broken = dir.path().join("broken.json");
    fs::write(&broken, chart.to_string()).unwrap();
    let o = chartmut(&["validate", path(&broken)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("dangling_transition"));
}

#[test]
fn simulate_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = chartmut(&[
        "simulate",
        path(&corpus("fridge.chart.json")),
        path(&corpus("fridge.suite.json")),
        "--trace-out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let trace: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("door_open_at_5.json")).unwrap()).unwrap();
    assert_eq!(trace["active_state"][5], "S_OPEN");
    assert_eq!(trace["outputs"]["LIGHT"][5], 1.0);
}

#[test]
fn coverage_report() {
    let o = chartmut(&["coverage", path(&corpus("door.chart.json")), path(&corpus("door.suite.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("execution coverage: 100.0%"));
}

#[test]
fn baseline_mutants_validate() {
    let dir = tempfile::tempdir().unwrap();
    let o = chartmut(&[
        "mutate-baseline",
        path(&corpus("elevator.chart.json")),
        "--count",
        "5",
        "--seed",
        "3",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let charts: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".chart.json"))
        .collect();
    assert_eq!(charts.len(), 5);
    for c in charts {
        assert_eq!(chartmut(&["validate", path(&c)]).status.code(), Some(0));
    }
}

#[test]
fn mutate_llm_with_synthetic_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("llm.json");
    fs::write(
        &cfg,
        r#"{"endpoint": {"name": "mock", "model": "m", "provider": {"type": "synthetic"}},
            "strategy": "local", "element": "T2", "few_shot": 3, "n_mutants": 4, "record": "fixtures"}"#,
    )
    .unwrap();
    let out = dir.path().join("mutants");
    let o = chartmut(&["mutate-llm", path(&corpus("fridge.chart.json")), "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("4 proposals, 0 parse failures"));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 4);
    assert_eq!(fs::read_dir(dir.path().join("fixtures")).unwrap().count(), 1);

    fs::write(
        &cfg,
        r#"{"endpoint": {"name": "mock", "model": "m", "provider": {"type": "synthetic"}}, "strategy": "local"}"#,
    )
    .unwrap();
    assert_eq!(
        chartmut(&["mutate-llm", path(&corpus("fridge.chart.json")), "--config", path(&cfg)]).status.code(),
        Some(2)
    );
}

#[test]
fn campaign_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("campaign.json");
    let text = serde_json::json!({
        "model": corpus("fridge.chart.json"),
        "suite": corpus("fridge.suite.json"),
        "strategies": ["global"],
        "few_shot_counts": [0],
        "temperatures": [0.7],
        "mutants_per_cell": 5,
        "llms": [{"name": "mock", "model": "m", "provider": {"type": "synthetic", "defect_rate": 0.2}}],
        "baseline": {"count": 10},
        "output": "store",
    });
    fs::write(&cfg, text.to_string()).unwrap();
    let o = chartmut(&["campaign", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("2 cells run, 0 already complete, 1 LLM requests"));
    let o = chartmut(&["campaign", path(&cfg)]);
    assert!(stdout(&o).starts_with("0 cells run, 2 already complete, 0 LLM requests"));

    let store = dir.path().join("store");
    let out = dir.path().join("report");
    let o = chartmut(&["report", path(&store), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let baseline = csv.lines().find(|l| l.starts_with("baseline,")).unwrap();
    assert_eq!(baseline.split(',').nth(10), Some("1.000000"));

    let log = store.join("campaign.ndjson");
    let text = fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[2].truncate(10);
    fs::write(&log, lines.join("\n")).unwrap();
    let o = chartmut(&["report", path(&store), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("campaign.ndjson:3:"));

    assert_eq!(chartmut(&["report", "/nonexistent/store"]).status.code(), Some(2));
}
