use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mvcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvcs")).args(args).env_remove("MVCS_MAX_DIM").output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn verify(cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["verify", "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    mvcs(&args)
}

// Drops every wall_time_ms value, the one field outside the determinism contract.
fn strip_times(json: &str) -> String {
    json.lines().filter(|l| !l.trim_start().starts_with("\"wall_time_ms\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn lists_every_key() {
    let out = mvcs(&["list-families"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for f in ["canonical", "vcs_matrix", "analytic", "quaternion", "landau", "cuntz"] {
        assert!(text.lines().any(|l| l.starts_with(f)), "{f} missing");
    }
    let out = mvcs(&["list-checks"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 12);
}

#[test]
fn passing_suite_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"family": "canonical", "K_max": 12, "checks": ["resolution"]}"#);
    let out = verify(&cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["checks"][0]["defect"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // truncated Cuntz isometries leave zero columns, so the dilation is not minimal
    let cfg = write(dir.path(), "c.json", r#"{"family": "cuntz", "D": 10, "K_max": 2, "checks": ["minimality"]}"#);
    let out = verify(&cfg, &["--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("minimality,"));
    assert!(text.contains(",false,"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("unknown_key.json", r#"{"family": "canonical", "K_maximum": 3}"#),
        ("unknown_family.json", r#"{"family": "bogus"}"#),
        ("unknown_check.json", r#"{"family": "canonical", "checks": ["everything"]}"#),
        ("bad_tolerance.json", r#"{"family": "canonical", "tolerance": -1}"#),
        ("syntax.json", r#"{"family": "canonical",,}"#),
        ("wrong_family.json", r#"{"family": "landau", "checks": ["sun_reln"]}"#),
    ] {
        let out = verify(&write(dir.path(), name, text), &[]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let out = mvcs(&["verify", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(mvcs(&["verify"]).status.code(), Some(2));
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        "{\n  \"family\": \"canonical\",\n  \"family_params\": {\n    \"radius\": 2\n  }\n}\n",
    );
    let out = verify(&cfg, &[]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("radius") && err.contains("line 4"), "{err}");
}

#[test]
fn dimension_cap_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"family": "cuntz", "D": 70, "checks": ["resolution"]}"#);
    let out = verify(&cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4096"));
    let out = Command::new(env!("CARGO_BIN_EXE_mvcs"))
        .args(["verify", "--config", cfg.to_str().unwrap()])
        .env("MVCS_MAX_DIM", "4900")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"family": "landau", "K_max": 6, "L_max": 4, "radial_order": 10, "cp_configs": 10, "naimark_subsets": 5,
            "dilation_max_carrier": 32, "checks": ["resolution", "normalization", "cp_positivity", "reproduce", "dilation"]}"#,
    );
    let a = verify(&cfg, &["--seed", "9"]);
    let b = verify(&cfg, &["--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    let (a, b) = (String::from_utf8(a.stdout).unwrap(), String::from_utf8(b.stdout).unwrap());
    assert_eq!(strip_times(&a), strip_times(&b));
    let c = String::from_utf8(verify(&cfg, &["--seed", "10"]).stdout).unwrap();
    assert_ne!(strip_times(&a), strip_times(&c));
    let v: Value = serde_json::from_str(&c).unwrap();
    assert_eq!(v["seed"], 10);
}

#[test]
fn out_flag_and_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_config.csv");
    let text = format!(
        r#"{{"family": "cuntz", "D": 20, "checks": ["bijection", "cuntz"], "bijection_limit": 1000, "output_path": {}}}"#,
        serde_json::to_string(target.to_str().unwrap()).unwrap()
    );
    let cfg = write(dir.path(), "c.json", &text);
    let out = verify(&cfg, &["--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&target).unwrap().lines().count(), 3);
    let flag = dir.path().join("flag.json");
    let out = verify(&cfg, &["--out", flag.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&flag).unwrap()).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn empty_check_list_is_a_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"family": "quaternion", "checks": []}"#);
    let out = verify(&cfg, &["--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
}
