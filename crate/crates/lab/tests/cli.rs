use std::path::Path;
use std::process::{Command, Output};

fn gneiting(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gneiting")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CASE4: &str = r#"{
  "schema": 1,
  "covariance": {"d1": 1, "d2": 1,
    "factor1": {"family": "gen-cauchy", "params": [1.0, 0.3]},
    "factor2": {"family": "gen-cauchy", "params": [1.0, 0.4]}},
  "window": {"body1": {"kind": "unit-box", "dim": 1}, "body2": {"kind": "unit-box", "dim": 1}},
  "functional": {"kind": "hermite-poly", "q": 2},
  "t_ladder": [8, 16, 32, 64],
  "n_reps": 40,
  "master_seed": 7
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let out = dir.join("out");
    let text = text.replacen('{', &format!("{{\n  \"output_dir\": {:?},", out), 1);
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn classify_reports_rosenblatt_case() {
    let o = gneiting(&["classify", "--d1", "2", "--d2", "1", "--R", "2", "--rho1", "0.5", "--rho2", "0.3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["regime"], "case4-rosenblatt");
    assert_eq!(v["exponent1"], 3.0);
    assert!((v["exponent2"].as_f64().unwrap() - 1.55).abs() < 1e-12);
    assert_eq!(v["limit_law"]["kind"], "rosenblatt");
}

#[test]
fn classify_rank_one_is_gaussian() {
    let o = gneiting(&["classify", "--d1", "1", "--d2", "1", "--R", "1", "--rho1", "0.5", "--rho2", "0.3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["regime"], "rank1-gaussian");
    assert_eq!(v["limit_law"]["kind"], "gaussian");
}

#[test]
fn classify_usage_errors_exit_2() {
    let o = gneiting(&["classify", "--d1", "2", "--d2", "1", "--R", "2", "--rho1", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--rho2"));
    let o = gneiting(&["classify", "--d1", "2", "--d2", "1", "--R", "2", "--rho1", "-1", "--rho2", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_grid_csv() {
    let o = gneiting(&["classify", "--d1", "2", "--d2", "1", "--R", "2", "--grid"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# {"));
    assert_eq!(lines[1], "rho1,rho2,regime,e1,e2");
    assert_eq!(lines.len(), 2 + 100 * 100);
}

#[test]
fn cumulants_power_law() {
    let o = gneiting(&["cumulants", "--kernel", "power-law", "--alpha", "0.4", "--domain", "box1", "--k", "2..5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][..2], ["2", "1.0"]);
    let c3: f64 = rows[1][1].parse().unwrap();
    assert!((c3 - 0.4183498886027492).abs() < 1e-4);
    let o = gneiting(&["cumulants", "--alpha", "0.7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rosenblatt_density_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let o = gneiting(&["rosenblatt", "--alpha", "0.3", "--beta", "0.28", "--points", "4001", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.cumulants.json")).unwrap()).unwrap();
    assert!((meta["grid_mass"].as_f64().unwrap() - 1.0).abs() < 1e-4);
    assert_eq!(meta["cumulants"][1]["value"], 1.0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().nth(1), Some("x,pdf,cdf"));
    assert_eq!(text.lines().count(), 2 + 4001);
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CASE4);
    let a = dir.path().join("a.csv");
    let raw = dir.path().join("f.bin");
    let run = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_gneiting"))
            .args(["simulate", "--config", &cfg, "--out", a.to_str().unwrap(), "--raw", raw.to_str().unwrap()])
            .env("GNEITING_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(&a).unwrap(), std::fs::read(&raw).unwrap())
    };
    let first = run("1");
    let second = run("3");
    assert_eq!(first, second);
    let text = String::from_utf8(first.0).unwrap();
    assert!(text.lines().next().unwrap().contains("\"config_hash\""));
    assert_eq!(text.lines().count(), 2 + 4 * 40);
    let (header, values) = gneiting_lab::io::read_raw(&raw).unwrap();
    assert_eq!(header["node_counts"], serde_json::json!([8, 8]));
    assert_eq!(values.len(), 64);
}

#[test]
fn invalid_config_fails_fast() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &CASE4.replace("\"n_reps\"", "\"n_rep\": 1, \"n_reps\""));
    let o = gneiting(&["verify", "variance", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
    let cfg = write_config(dir.path(), "bad2.json", &CASE4.replace("[1.0, 0.4]", "[1.5, 0.4]"));
    assert_eq!(gneiting(&["simulate", "--config", &cfg, "--out", "/dev/null"]).status.code(), Some(2));
}

#[test]
fn suite_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CASE4);
    let o = gneiting(&["verify", "clt", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_variance_writes_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CASE4);
    let o = gneiting(&["verify", "variance", "--config", &cfg]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 1, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["test"], "variance");
    assert_eq!(v["pass"], code == 0);
    assert!(v["threshold"]["slope_abs_diff"].is_number());
    let on_disk = std::fs::read_to_string(dir.path().join("out/verdict_variance.json")).unwrap();
    assert!(on_disk.contains("\"provenance\""));
    let csv = std::fs::read_to_string(dir.path().join("out/variance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 4);
}

#[test]
fn verify_appendix_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &CASE4.replace("[8, 16, 32, 64]", "[64, 128]"));
    let o = gneiting(&["verify", "appendixA", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["checks"][0]["pass"], true);
    assert!(v["details"]["ratios"][1].as_f64().unwrap() > v["details"]["ratios"][0].as_f64().unwrap());
}
