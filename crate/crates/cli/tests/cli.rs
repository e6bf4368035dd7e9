use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

fn cfslab(experiment: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfslab"))
        .arg(experiment)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn jacobson_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfslab("jacobson", &shipped("jacobson"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(dir.path());
    assert_eq!(s["pass"], true);
    let checks = s["checks"].as_array().unwrap();
    let defects: Vec<&Value> = checks.iter().filter(|c| c["name"].as_str().unwrap().ends_with("_defect")).collect();
    assert!(defects.len() >= 5);
    for c in checks {
        assert!(c["measured"].is_number() && c["expected"].is_number() && c["tag"].is_string(), "{c}");
        assert_eq!(c["pass"], true, "{c}");
    }
    let csv = fs::read_to_string(dir.path().join("jacobson.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(csv.starts_with("family,axis,size,"));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(cfslab("minimize", &shipped("minimize"), dir.path(), &[]).status.code(), Some(0));
    }
    let names: Vec<String> =
        summary(a.path())["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().into()).collect();
    assert!(names.contains(&"history.csv".to_string()) && names.contains(&"convergence.svg".to_string()));
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfslab("minimize", &shipped("minimize"), dir.path(), &["--seed", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(summary(dir.path())["seed"], 11);
}

#[test]
fn malformed_config_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[jacobson]\nsize = 4\nsize_typo = 5\n");
    let out = cfslab("jacobson", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":4") && err.contains("size_typo"), "{err}");

    let cfg = write_config(dir.path(), "[jacobson]\nsize = \"four\"\n");
    let out = cfslab("jacobson", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));

    let cfg = write_config(dir.path(), "[jacobson]\ndefect_tol = -1.0\n");
    let out = cfslab("jacobson", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("jacobson.defect_tol"));
}

#[test]
fn vacuum_scaling_needs_four_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[vacuum-scaling]\npoints = 1\n");
    let out = cfslab("vacuum-scaling", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("vacuum-scaling.points") && err.contains("at least 4"), "{err}");
}

#[test]
fn missing_config_and_wrong_experiment_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cfslab("jacobson", &dir.path().join("absent.toml"), dir.path(), &[]).status.code(), Some(2));
    assert_eq!(cfslab("minimize", &shipped("jacobson"), dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[vacuum-scaling]\ntrace_slope_tol = 1e-12\n");
    let out = cfslab("vacuum-scaling", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["pass"], false);
    let trace = s["checks"].as_array().unwrap().iter().find(|c| c["name"] == "local_trace_slope").unwrap();
    assert_eq!(trace["pass"], false);
    assert_eq!(trace["comparison"], "near");
    assert!(dir.path().join("out/sweep.svg").exists());
}

#[test]
fn non_convergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // Position stationarity stalls at f = 3.
    let cfg = write_config(dir.path(), "[minimize]\nf = 3\ntrace = 0.5\nkappa = 0.2\npoints = 8\nmax_iters = 50\n");
    let out = cfslab("minimize", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&dir.path().join("out"));
    assert!(s["failure"].as_str().unwrap().contains("no convergence"));
}

#[test]
fn every_experiment_runs_on_a_small_configuration() {
    let small = [
        ("verify-conservation", "[verify-conservation]\nbackgrounds = 3\ncritical_runs = 1\n"),
        ("verify-boundary-lemma", ""),
        (
            "area-change",
            "[area-change]\nsizes = [4]\nomega_threshold = 0.25\nbump_lo = [0.25, 0.0, 0.0, 0.0]\nrel_tol = 1e-2\n",
        ),
        ("power-counting", "[power-counting]\np_max = 6\nq_max = 2\nqhat_max = 1\n"),
        ("vacuum-scaling", "[vacuum-scaling]\npoints = 5\n"),
    ];
    for (experiment, text) in small {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), text);
        let out = cfslab(experiment, &cfg, &dir.path().join("out"), &[]);
        assert_eq!(out.status.code(), Some(0), "{experiment}: {}", String::from_utf8_lossy(&out.stdout));
        let s = summary(&dir.path().join("out"));
        assert_eq!(s["experiment"], experiment);
        for name in s["artifacts"].as_array().unwrap() {
            assert!(dir.path().join("out").join(name.as_str().unwrap()).exists());
        }
    }
}

#[test]
fn plots_can_be_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "plots = false\n");
    assert_eq!(cfslab("verify-boundary-lemma", &cfg, &dir.path().join("out"), &[]).status.code(), Some(0));
    assert!(!dir.path().join("out/lemma.svg").exists());
    assert!(dir.path().join("out/lemma.csv").exists());
}
