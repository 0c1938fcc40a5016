use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

use mfo::experiment::{self, RunReport};
use mfo::models::congestion::CongestionParams;
use mfo::models::CongestionInstance;
use mfo::EmpiricalMeasure;

fn mfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfo")).args(args).env("MFO_THREADS", "2").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mfo(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn free_flow_congestion_runs_at_max_speed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"version": 1, "problem": {"name": "congestion", "params": {"alpha": 0, "grid_points": 121}},
            "marginal": {"dist": {"kind": "uniform", "a": 0, "b": 0.2}, "method": "grid", "n": 12},
            "method": "fw", "solver": {"iterations": 20}}"#,
    );
    let out = tmp.path().join("run");
    ok(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let p = CongestionInstance::new(CongestionParams { alpha: 0.0, grid_points: 121, ..Default::default() }).unwrap();
    let fin = read_json(&out.join("final.json"));
    let mu: EmpiricalMeasure = serde_json::from_value(fin["measure"].clone()).unwrap();
    for a in mu.atoms() {
        assert_eq!(a.decision().0, p.max_speed_trajectory(a.x.value()));
    }
    let rows = fs::read_to_string(out.join("arrivals.csv")).unwrap();
    assert_eq!(rows.lines().count(), mu.len() + 1);
}

#[test]
fn resource_at_desk_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.json",
        r#"{"version": 1, "problem": {"name": "resource", "params": {"steps": 100}},
            "marginal": {"dist": {"kind": "exponential", "rate": 1}, "method": "sample", "n": 100},
            "method": "fw", "solver": {"iterations": 500}}"#,
    );
    let out = tmp.path().join("run");
    let start = Instant::now();
    ok(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "4"]);
    assert!(start.elapsed().as_secs() < 120);
    let text = ok(&["report", "--out", out.to_str().unwrap()]);
    let rep: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(rep.iterations, 500);
    assert_eq!(rep.negative_gaps, 0);
    assert!(rep.certified_suboptimality <= rep.min_gap + 1e-12);
    assert_eq!(experiment::report(&out).unwrap(), rep);
    for f in ["history.csv", "profiles.csv", "aggregate.csv", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn bridge_onto_own_marginal_keeps_eps0() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.json",
        r#"{"version": 1, "problem": {"name": "resource", "params": {"steps": 20}},
            "marginal": {"dist": {"kind": "exponential", "rate": 1}, "method": "grid", "n": 10},
            "method": "fw", "solver": {"iterations": 30}}"#,
    );
    let run = tmp.path().join("run");
    ok(&["solve", "--config", &cfg, "--out", run.to_str().unwrap()]);
    let fin = read_json(&run.join("final.json"));
    let m1 = tmp.path().join("m1.json");
    let mu0: EmpiricalMeasure = serde_json::from_value(fin["measure"].clone()).unwrap();
    fs::write(&m1, serde_json::to_string(&mu0.first_marginal().unwrap()).unwrap()).unwrap();
    let bridged = tmp.path().join("bridged.json");
    ok(&[
        "bridge",
        "--mu0",
        run.join("final.json").to_str().unwrap(),
        "--m1",
        m1.to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        bridged.to_str().unwrap(),
    ]);
    let b = read_json(&bridged);
    assert_eq!(b["d1"].as_f64().unwrap(), 0.0);
    assert_eq!(b["eta"].as_f64().unwrap(), fin["certificate"]["gap"].as_f64().unwrap());
    assert!((b["objective"].as_f64().unwrap() - fin["objective"].as_f64().unwrap()).abs() <= 1e-12);
}

#[test]
fn quantize_reports_exact_distance() {
    let text = ok(&["quantize", "--dist", "uniform:0,1", "--n", "8"]);
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert!((doc["d1"].as_f64().unwrap() - 1.0 / 32.0).abs() <= 1e-15);
    assert_eq!(doc["measure"]["atoms"].as_array().unwrap().len(), 8);
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"version": 1, "problem": {"name": "resource", "params": {"steps": 10}},
            "marginal": {"dist": {"kind": "exponential", "rate": 1}, "method": "grid", "n": 0},
            "method": "fw"}"#,
    );
    let out = mfo(&["solve", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("marginal.n"));
    let out = mfo(&["quantize", "--dist", "poisson:2", "--n", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = experiment::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        experiment::Instance::build(&cfg.problem).unwrap();
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{"version": 1, "problem": {"name": "resource", "params": {"steps": 20}},
            "marginal": {"dist": {"kind": "exponential", "rate": 1}, "method": "sample", "n": 30},
            "method": "sfw", "solver": {"iterations": 40, "samples": 4, "seed": 5}, "repeats": 3}"#,
    );
    let mut dirs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_mfo"))
            .args(["solve", "--config", &cfg, "--out", out.to_str().unwrap()])
            .env("MFO_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        dirs.push(out);
    }
    for entry in walk(&dirs[0]) {
        let rel = entry.strip_prefix(&dirs[0]).unwrap();
        assert_eq!(fs::read(&entry).unwrap(), fs::read(dirs[1].join(rel)).unwrap(), "{}", rel.display());
    }
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(walk(&path));
        } else {
            files.push(path);
        }
    }
    files
}
