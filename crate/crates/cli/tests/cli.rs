use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bkp-tau"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn qfn_prints_the_polynomial() {
    let out = run(&["qfn", "--partition", "2,1", "--cap", "4"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["result"]["display"], "1/6*t1^3 + -2*t3");
    assert_eq!(v["config"]["partition"], serde_json::json!([2, 1]));
}

#[test]
fn braden_row() {
    let out = run(&["braden", "--r", "1", "--nmax", "1", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let cols: Vec<&str> = last.split(',').collect();
    assert_eq!(cols[0], "1");
    let partial: f64 = cols[2].parse().unwrap();
    assert!((partial - (1.0 + 0.113_893_872_749_533_4 / std::f64::consts::PI)).abs() < 1e-8);
    assert!(text.contains("# tolerance: 1e-8"));
}

#[test]
fn verify_all_fast_passes() {
    let out = run(&["verify-all", "--level", "fast"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(stdout_json(&out)["result"]["passed"], true);
}

#[test]
fn unknown_key_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(
        &p,
        r#"{"data": {"series": "S0", "l": 2}, "truncation": {"max_part": 2, "max_length": 2, "degree_cap": 3, "depth": 1}}"#,
    )
    .unwrap();
    let out = run(&["sum", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("truncation") && err.contains("depth"), "{err}");
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"ensemble": {"id": 2,"#).unwrap();
    let out = run(&["integral", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_values_exit_2() {
    assert_eq!(run(&["braden", "--r", "1", "--sign", "x"]).status.code(), Some(2));
    assert_eq!(run(&["braden", "--r", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["qfn", "--partition", "1,2", "--cap", "4"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn hirota_separates_tau_from_non_tau() {
    assert_eq!(run(&["hirota", "--partition", "3,1", "--cap", "8"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("poly.json");
    std::fs::write(&p, r#"[{"monomial": {}, "coeff": "1"}, {"monomial": {"1": 6}, "coeff": "1"}]"#).unwrap();
    let out = run(&["hirota", "--poly", p.to_str().unwrap(), "--cap", "8"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["result"]["vanishes"], false);
}

#[test]
fn identical_runs_are_byte_identical() {
    let cfg = configs().join("sample_b.json");
    let a = run(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "11", "--format", "csv"]);
    let b = run(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "11", "--format", "csv", "--threads", "1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "12", "--format", "csv"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn shipped_configs_run() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let cmd = name.split('_').next().unwrap();
        let out = run(&[cmd, "--config", path.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let v = stdout_json(&out);
        assert_eq!(v["command"], cmd);
        assert!(v["config"].is_object());
    }
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("out.csv");
    let out = run(&["partitions", "--max-part", "3", "--format", "csv", "--output", p.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(p).unwrap();
    assert!(text.contains("\"(3,2,1)\",6,3,1/30"), "{text}");
}
