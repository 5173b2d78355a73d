use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const TOY: [&str; 6] = ["--nx", "12", "--ny", "6", "--n", "4"];

fn geneo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geneo")).args(args).output().unwrap()
}

fn run_in(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(&TOY);
    args.extend_from_slice(extra);
    geneo(&args)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn single_subdomain_is_a_direct_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = geneo(&[
        "run", "--out", dir.path().to_str().unwrap(), "--nx", "8", "--ny", "4", "--n", "1", "--variant", "as",
        "--mode", "one-level",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["solve"]["iterations"], 1);
    assert!((r["solve"]["kappa"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    for f in ["report.json", "convergence.csv", "eigenvalues.csv", "partition.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn hybrid_run_with_oracle_passes_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--layers", "--mode", "hybrid", "--tau-flat", "10", "--oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("converged=true"), "{stdout}");
    let r = report(dir.path());
    assert!(r["oracle"]["bound_checks"].as_array().unwrap().iter().all(|c| c["satisfied"] == true));
    let conv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(conv.lines().count() > 2);
}

#[test]
fn reports_match_apart_from_timings() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let extra = ["--variant", "nn", "--mode", "projected", "--tau-sharp", "0.3", "--scaling", "mu"];
    run_in(a.path(), &extra);
    run_in(b.path(), &extra);
    let (mut ra, mut rb) = (report(a.path()), report(b.path()));
    ra["timings"] = Value::Null;
    rb["timings"] = Value::Null;
    assert_eq!(ra, rb);
    for f in ["eigenvalues.csv", "partition.txt", "convergence.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn not_converged_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--mode", "one-level", "--max-iterations", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("report.json").is_file());
}

#[test]
fn missing_threshold_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--variant", "as", "--mode", "hybrid"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau_flat"));
    let out = run_in(dir.path(), &["--variant", "nn", "--mode", "additive", "--tau-sharp", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"nx": 12, "krylov": {"max_iterations": "many"}}"#).unwrap();
    let out = geneo(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("krylov.max_iterations"), "{stderr}");

    fs::write(&cfg, r#"{"nx": 12, "colour": 3}"#).unwrap();
    let out = geneo(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"nx": 12, "ny": 6, "n_subdomains": 4, "mode": "one_level"}"#).unwrap();
    let out = geneo(&["run", "--config", cfg.to_str().unwrap(), "--nx", "10", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["config"]["nx"], 10);
    assert_eq!(r["config"]["ny"], 6);
}

#[test]
fn bad_flag_exits_one() {
    assert_eq!(geneo(&["run", "--variant", "bogus"]).status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_tau() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--taus", "4,10,100", "--out", dir.path().to_str().unwrap(), "--mode", "hybrid"];
    args.extend_from_slice(&TOY);
    let out = geneo(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let rows: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
}

#[test]
fn exported_partition_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut args = vec!["export", "--out", d];
    args.extend_from_slice(&TOY);
    assert_eq!(geneo(&args).status.code(), Some(0));
    let mtx = fs::read_to_string(dir.path().join("matrix.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
    for f in ["rhs.mtx", "vertices.mtx", "triangles.mtx", "partition.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }

    let part = dir.path().join("partition.txt");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_in(a.path(), &["--mode", "one-level"]);
    run_in(b.path(), &["--mode", "one-level", "--partition-file", part.to_str().unwrap()]);
    assert_eq!(report(a.path())["solve"], report(b.path())["solve"]);
}
