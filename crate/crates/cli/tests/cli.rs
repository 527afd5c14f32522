use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sewkit(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_sewkit"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .env_remove("SEWKIT_OUT")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str], config: &str, dir: &Path) -> PathBuf {
    let out = dir.join("out");
    let o = sewkit(&[args, &["--out", out.to_str().unwrap()]].concat(), config, dir);
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    out
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

const ITO: &str = r#"{"params": {"germ": {"name": "ito"}, "hurst": 0.5, "paths": 64, "steps": 256, "levels": {"first": 2, "last": 8}}}"#;

#[test]
fn sew_study_is_byte_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let oa = run_ok(&["sew-study", "--seed", "42"], ITO, a.path());
    let ob = run_ok(&["sew-study", "--seed", "42"], ITO, b.path());
    let ra = fs::read(oa.join("results.csv")).unwrap();
    assert_eq!(ra, fs::read(ob.join("results.csv")).unwrap());
    assert!(String::from_utf8(ra).unwrap().starts_with("level,mesh_w,rms_error\n"));
    // a different seed gives different errors
    let c = TempDir::new().unwrap();
    let oc = run_ok(&["sew-study", "--seed", "43"], ITO, c.path());
    assert_ne!(fs::read(oa.join("results.csv")).unwrap(), fs::read(oc.join("results.csv")).unwrap());
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = r#"{"params": {"hurst": [0.25], "paths": 24, "steps": 64, "levels": {"first": 2, "last": 6}, "fine_levels": {"first": 4, "last": 6}, "grid": {"n": 32, "half_period": 6.0}}}"#;
    let mut outputs = Vec::new();
    for w in ["1", "3", "8"] {
        let d = TempDir::new().unwrap();
        let out = run_ok(&["functional-rate", "--workers", w, "--seed", "7"], cfg, d.path());
        outputs.push((fs::read(out.join("results.csv")).unwrap(), fs::read(out.join("summary.json")).unwrap(), d));
    }
    for o in &outputs[1..] {
        assert_eq!(o.0, outputs[0].0);
        assert_eq!(o.1, outputs[0].1);
    }
}

#[test]
fn writes_every_artifact() {
    let d = TempDir::new().unwrap();
    let out = run_ok(&["sew-study"], ITO, d.path());
    for f in ["resolved-config.json", "results.csv", "summary.json", "errors.svg", "trace.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let resolved: Value = serde_json::from_str(&fs::read_to_string(out.join("resolved-config.json")).unwrap()).unwrap();
    assert_eq!(resolved["experiment"], "sew-study");
    assert_eq!(resolved["seed"], 20240617);
    // defaults are written out explicitly
    assert_eq!(resolved["params"]["horizon"], 1.0);
    assert_eq!(resolved["params"]["control"]["kind"], "linear");
    let s = summary(&out);
    assert!(s["verdicts"].as_array().unwrap().iter().any(|v| v["criterion"] == "ito_rate"));
    assert!(fs::read_to_string(out.join("errors.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn unknown_field_is_a_schema_error() {
    let d = TempDir::new().unwrap();
    let o = sewkit(&["sew-study", "--out", d.path().join("o").to_str().unwrap()], r#"{"params": {"hurts": 0.5}}"#, d.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("schema error") && err.contains("hurts"), "{err}");

    let o = sewkit(&["sew-study"], r#"{"sed": 1}"#, d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));

    let o = sewkit(&["mtype"], r#"{"params": {"doob": {"sizes": [4, 8], "bogus": true}}}"#, d.path());
    assert!(!o.status.success());

    let o = sewkit(&["sew-study"], "{not json", d.path());
    assert!(!o.status.success());
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let d = TempDir::new().unwrap();
    let o = sewkit(&["kolmogorov"], r#"{"experiment": "mtype"}"#, d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("`mtype`"));
}

#[test]
fn budget_overflow_is_descriptive() {
    let d = TempDir::new().unwrap();
    let o = sewkit(&["sew-study"], r#"{"params": {"steps": 64, "levels": {"first": 2, "last": 9}}}"#, d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("dyadic level 9"));
}

#[test]
fn dirac_regularity_budget_is_one() {
    let d = TempDir::new().unwrap();
    let cfg = r#"{"params": {"hurst": 0.5, "dim": 1, "profile": {"kind": "dirac", "theta": 2.0}, "paths": 2, "steps": 512, "grid_sizes": [32, 64]}}"#;
    let out = run_ok(&["regularity-probe"], cfg, d.path());
    let s = summary(&out);
    assert_eq!(s["results"]["budget"]["gamma_max"], 1.0);
    assert_eq!(s["results"]["gamma_max"], 1.0);
    assert!(out.join("norms.svg").exists());
}

#[test]
fn constant_functional_is_degenerate_exact() {
    let d = TempDir::new().unwrap();
    let cfg = r#"{"params": {"hurst": [0.5], "paths": 8, "steps": 128, "levels": {"first": 2, "last": 7}, "fine_levels": {"first": 5, "last": 7}, "profile": {"kind": "constant", "value": 3.0}, "grid": {"n": 16, "half_period": 4.0}}}"#;
    let out = run_ok(&["functional-rate"], cfg, d.path());
    let s = summary(&out);
    assert_eq!(s["results"]["configurations"][0]["slope_report"], "degenerate: exact");
    assert_eq!(s["all_pass"], true);
}

#[test]
fn out_dir_precedence() {
    let d = TempDir::new().unwrap();
    let cfg_out = d.path().join("from-config");
    let env_out = d.path().join("from-env");
    let flag_out = d.path().join("from-flag");
    let cfg = format!(r#"{{"out": {:?}, "params": {{"germ": {{"name": "zero"}}}}}}"#, cfg_out.to_str().unwrap());
    let path = d.path().join("c.json");
    fs::write(&path, &cfg).unwrap();
    let run = |env: bool, flag: bool| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sewkit"));
        c.args(["sew-study", "--config", path.to_str().unwrap()]).env_remove("SEWKIT_OUT");
        if env {
            c.env("SEWKIT_OUT", &env_out);
        }
        if flag {
            c.args(["--out", flag_out.to_str().unwrap()]);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(false, false);
    assert!(cfg_out.join("results.csv").exists());
    run(true, false);
    assert!(env_out.join("results.csv").exists());
    run(true, true);
    assert!(flag_out.join("results.csv").exists());
}
