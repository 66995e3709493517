use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonconv-clt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, json: serde_json::Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn linear_pair() -> serde_json::Value {
    serde_json::json!({
        "schema_version": 1,
        "name": "pair",
        "polynomials": [["0", "1"], ["0", "2"]],
        "process": {"kind": "iid", "support": [
            {"value": ["-1"], "prob": "1/2"},
            {"value": ["1"], "prob": "2/4"}
        ]},
        "observable": {"monomials": [{"coef": "1", "powers": [[1, 1, 1], [2, 1, 1]]}]},
        "simulation": {"n_ladder": [200, 400], "replicates": 200, "t_grid": [1.0], "seed": 3}
    })
}

#[test]
fn list_names_every_builtin() {
    let out = cli(&["list"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for name in ["classical-clt", "odd-squares-density", "sec8-zero-variance", "linear-pair"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn analyze_reports_exact_entries() {
    let out = cli(&["analyze", "--builtin", "equivalent-nonlinear"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["covariance"]["dmatrix"][0][1]["exact"], "1/2");
    assert_eq!(report["covariance"]["dmatrix"][0][1]["provenance"], "nonlinear-pairing");
}

#[test]
fn csv_has_the_documented_columns() {
    let out = cli(&["analyze", "--builtin", "linear-pair", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,estimate,std_error,predicted,z"));
    assert!(lines.any(|l| l.starts_with("linear-pair/D2,1")));
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.json", linear_pair());
    let target = dir.path().join("report.json");
    let out = cli(&["verify", "--config", &cfg, "--out", target.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.json", linear_pair());
    let a = cli(&["simulate", "--config", &cfg, "--seed", "99", "--threads", "1"]);
    let b = cli(&["simulate", "--config", &cfg, "--seed", "99", "--threads", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = cli(&["simulate", "--config", &cfg, "--seed", "100"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn canonical_config_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.json", linear_pair());
    let first = cli(&["config", "--config", &cfg]);
    assert_eq!(code(&first), 0);
    assert!(stdout(&first).contains("\"1/2\""));
    let again = dir.path().join("canonical.json");
    std::fs::write(&again, &first.stdout).unwrap();
    let second = cli(&["config", "--config", again.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn unknown_fields_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut json = linear_pair();
    json["observable"]["weights"] = serde_json::json!([1]);
    let cfg = write_config(dir.path(), "bad.json", json);
    let out = cli(&["analyze", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn floats_in_models_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut json = linear_pair();
    json["process"]["support"][0]["prob"] = serde_json::json!("0.5");
    let cfg = write_config(dir.path(), "float.json", json);
    assert_eq!(code(&cli(&["analyze", "--config", &cfg])), 1);
}

#[test]
fn non_integer_valued_polynomials_are_math_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut json = linear_pair();
    json["polynomials"] = serde_json::json!([["0", "1/2"], ["0", "2"]]);
    let cfg = write_config(dir.path(), "half.json", json);
    let out = cli(&["analyze", "--config", &cfg]);
    assert_eq!(code(&out), 2);
}

#[test]
fn failed_verification_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut json = linear_pair();
    json["analysis"] = serde_json::json!({"z_threshold": 1e-6});
    let cfg = write_config(dir.path(), "strict.json", json);
    let out = cli(&["verify", "--config", &cfg]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("verification failed"));
}

#[test]
fn density_of_odd_squares() {
    let out = cli(&["density", "--builtin", "odd-squares-density"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["rows"][0]["density"]["exact"], "1/2");
    assert_eq!(report["rows"][0]["empirical"], "1/2");
}

#[test]
fn argument_errors_and_help() {
    assert_eq!(code(&cli(&["analyze"])), 1);
    assert_eq!(code(&cli(&["analyze", "--builtin", "no-such-scenario"])), 1);
    assert_eq!(code(&cli(&["frobnicate"])), 1);
    assert_eq!(code(&cli(&["--help"])), 0);
    assert_eq!(code(&cli(&["--version"])), 0);
}
