use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_passn-lab"));
    cmd.args(args).env_remove("PASSN_LAB_THREADS");
    if let Some(t) = threads {
        cmd.env("PASSN_LAB_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_results_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"recipe": "toy_models", "seed": 3}"#);
    let out = tmp.path().join("out");
    let o = lab(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "9"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("recipe,params,metric,value,n,epoch\n"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["recipe"], "toy_models");
    assert_eq!(summary["metrics"]["confident_constant_half"], true);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let names: Vec<String> = passn_lab::list_recipes().iter().map(|r| r.name.to_string()).collect();
    for name in &names {
        let cfg = passn_lab::ExperimentConfig::load(&dir.join(format!("{name}.json"))).unwrap();
        assert_eq!(&cfg.recipe, name);
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for body in [
        "not json",
        r#"{"recipe": "toy_models"}"#,
        r#"{"recipe": "no_such_recipe", "seed": 1}"#,
        r#"{"recipe": "toy_models", "seed": 1, "params": {"bogus": 1}}"#,
        r#"{"recipe": "toy_models", "seed": 1, "extra": true}"#,
    ] {
        let cfg = write_config(tmp.path(), body);
        let o = lab(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()], None);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{body}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
    let o = lab(&["run", tmp.path().join("missing.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(tmp.path(), r#"{"recipe": "toy_models", "seed": 1}"#);
    let o = lab(
        &["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()],
        Some("zero"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"recipe": "toy_models", "seed": 1}"#);
    // output directory nested under a regular file
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = lab(&["run", &cfg, "--out", blocker.join("out").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn list_recipes_in_registry_order() {
    let o = lab(&["list-recipes"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    let want: Vec<&str> = passn_lab::list_recipes().iter().map(|r| r.name).collect();
    assert_eq!(names, want);
    assert_eq!(names[0], "bounds_sweep");
    assert!(text.lines().all(|l| l.contains("[analogue: ")));
}

#[test]
fn bounds_prints_the_sweep() {
    let o = lab(&["bounds", "--n-max", "8"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,upper,lower_closed,lower_integer_s,case"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "2");
    assert!((first[1].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!((first[2].parse::<f64>().unwrap() - 4.0 / 7.0).abs() < 1e-15);
    assert!((first[3].parse::<f64>().unwrap() - 0.6).abs() < 1e-15);
    assert_eq!(text.lines().count(), 1 + 7);

    let bad = lab(&["bounds", "--p1", "0.2", "--p2", "0.3"], None);
    assert_ne!(bad.status.code(), Some(0));
}
