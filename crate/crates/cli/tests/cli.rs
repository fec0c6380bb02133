use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn crcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crcs")).args(args).output().expect("run crcs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn assert_valid(schema: &str, doc: &Value) {
    let schema = read_json(&repo().join("schemas").join(schema));
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let msgs: Vec<String> = match compiled.validate(doc) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "schema violations: {msgs:?}");
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_certify_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = repo().join("configs/simulate.json");
    let data = dir.path().join("d.csv");
    assert_eq!(code(&crcs(&["simulate", "--config", s(&sim), "--out", s(&data)])), 0);
    let est = dir.path().join("e.json");
    let o = crcs(&["estimate", "--method", "mle", "--k", "2", "--input", s(&data), "--out", s(&est), "--certify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&est);
    assert_valid("estimate.schema.json", &doc);
    assert_eq!(doc["fenchel"]["passed"], true);

    let report = dir.path().join("r.json");
    assert_eq!(code(&crcs(&["certify", "--input", s(&data), "--estimate", s(&est), "--out", s(&report)])), 0);
    assert_valid("fenchel_report.schema.json", &read_json(&report));

    let metrics = dir.path().join("m.json");
    let truth = repo().join("configs/simulate.json");
    let truth_doc = read_json(&truth)["truth"].clone();
    let truth_file = write(dir.path(), "truth.json", &truth_doc.to_string());
    assert_valid("truth_model.schema.json", &truth_doc);
    let o = crcs(&["metrics", "--estimate", s(&est), "--truth", s(&truth_file), "--out", s(&metrics)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&metrics);
    assert_valid("metrics.schema.json", &m);
    let (l1, tv) = (m["l1"].as_f64().unwrap(), m["tv"].as_f64().unwrap());
    assert!((l1 - 2.0 * tv).abs() < 1e-9);
}

#[test]
fn perturbed_estimate_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "time,status\n1,0\n2,1\n3,0\n4,2\n5,1\n6,0\n7,2\n");
    let est = dir.path().join("e.json");
    assert_eq!(code(&crcs(&["estimate", "--k", "2", "--input", s(&data), "--out", s(&est)])), 0);
    let mut doc = read_json(&est);
    // cause 2 has mass 1/2 beyond t = 4; move 0.05 of it to t = 4
    let jumps = doc["components"][1]["jumps"].as_array_mut().unwrap();
    let first = jumps[0]["v"].as_f64().unwrap();
    jumps[0]["v"] = Value::from(first + 0.05);
    let bad = write(dir.path(), "bad.json", &doc.to_string());
    let o = crcs(&["certify", "--input", s(&data), "--estimate", s(&bad)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn naive_reports_sum_violations() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "time,status\n1,1\n2,2\n");
    let est = dir.path().join("e.json");
    assert_eq!(code(&crcs(&["estimate", "--method", "naive", "--k", "2", "--input", s(&data), "--out", s(&est)])), 0);
    let doc = read_json(&est);
    assert_valid("estimate.schema.json", &doc);
    assert!(!doc["sum_violations"].as_array().unwrap().is_empty());
}

#[test]
fn malformed_rows_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "time,status\n1,1\n2,oops\n");
    let o = crcs(&["estimate", "--k", "2", "--input", s(&data)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let data = write(dir.path(), "e.csv", "time,status\n1,5\n");
    assert_eq!(code(&crcs(&["estimate", "--k", "2", "--input", s(&data)])), 2);
    assert_eq!(code(&crcs(&["estimate", "--k", "2", "--input", "/nonexistent.csv"])), 2);
    assert_eq!(code(&crcs(&["estimate", "--bogus"])), 2);
}

#[test]
fn nonconvergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let sim = repo().join("configs/simulate.json");
    assert_eq!(code(&crcs(&["simulate", "--config", s(&sim), "--out", s(&data)])), 0);
    let o = crcs(&["estimate", "--k", "2", "--input", s(&data), "--max-iters", "0"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_contract() {
    let dir = tempfile::tempdir().unwrap();
    let sim = repo().join("configs/simulate.json");
    assert_valid("simulate_config.schema.json", &read_json(&sim));
    let a = crcs(&["simulate", "--config", s(&sim), "--n", "250"]);
    let b = crcs(&["simulate", "--config", s(&sim), "--n", "250"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 251);
    assert_eq!(code(&crcs(&["simulate", "--config", s(&sim), "--n", "0"])), 2);

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"truth":{"K":1,"cause_probs":[1.5],"cause_shapes":[{"family":"exponential","rate":1.0}],"obs":{"family":"uniform","a":0.0,"b":1.0}},"n":10,"seed":1}"#,
    );
    assert_eq!(code(&crcs(&["simulate", "--config", s(&bad)])), 2);
}

#[test]
fn minimax_eval_only() {
    let o = crcs(&["minimax", "--eval-only"]);
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_valid("minimax.schema.json", &doc);
    assert!((doc["bound"].as_f64().unwrap() - 0.0896).abs() < 5e-5);
    assert!((doc["d"].as_f64().unwrap() - 0.225_693_220_275_169_5).abs() < 1e-15);
    assert!(doc["two_point"].is_null());
}

#[test]
fn minimax_two_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", r#"{"n": 300, "reps": 3, "estimator": "naive"}"#);
    let o = crcs(&["minimax", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_valid("minimax.schema.json", &doc);
    let tp = &doc["two_point"];
    assert!(tp["max_risk"].as_f64().unwrap() >= tp["risk_at_f0"].as_f64().unwrap());
    assert_valid("minimax_config.schema.json", &read_json(&repo().join("configs/minimax.json")));
}

#[test]
fn rates_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo().join("configs/rates_smoke.json");
    assert_valid("rates_config.schema.json", &read_json(&cfg));
    assert_valid("rates_config.schema.json", &read_json(&repo().join("configs/rates_default.json")));
    let (out, summary) = (dir.path().join("t.csv"), dir.path().join("s.json"));
    let start = std::time::Instant::now();
    let o = crcs(&["rates", "--config", s(&cfg), "--out", s(&out), "--summary", s(&summary)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(start.elapsed().as_secs() < 60);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("metric,slope,intercept\n"));
    assert!(stdout.contains("mle/hellinger,"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("n,metric,q25,median,q75,slope_rowid\n"));
    assert_valid("rates_summary.schema.json", &read_json(&summary));
}

#[test]
fn rates_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.json",
        r#"{"truth":{"K":1,"cause_probs":[0.5],"cause_shapes":[{"family":"exponential","rate":1.0}],"obs":{"family":"uniform","a":0.0,"b":2.0}},"t0":1.0,"n_grid":[100,50,200],"reps":20,"base_seed":1}"#,
    );
    assert_eq!(code(&crcs(&["rates", "--config", s(&cfg)])), 2);
}
