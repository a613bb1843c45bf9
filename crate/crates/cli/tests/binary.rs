//! Runs the `renewal-lab` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renewal-lab")).args(args).current_dir(dir).env_remove("RENEWAL_LAB_OUT").output().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["lyapunov"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["category"], "config");
    assert!(!dir.path().join("renewal-lab-out").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "seed = 1\n[params]\nwalkz = 3\n").unwrap();
    let out = run(&["lyapunov", "--config", "c.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("walkz"));
}

#[test]
fn core_errors_map_to_their_category() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("lattice.toml"), "seed = 1\n[measure]\nbuiltin = \"diag-lattice\"\n[params]\nt_values = [6.283185307179586]\n").unwrap();
    let out = run(&["resolvent-scan", "--config", "lattice.toml"], dir.path());
    assert_eq!(out.status.code(), Some(20), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["category"], "singular");

    std::fs::write(dir.path().join("small.toml"), "seed = 1\n[params]\nb_min = 1.5\nb_max = 1.6\nb_points = 1\n").unwrap();
    let out = run(&["diophantine-scan", "--config", "small.toml"], dir.path());
    assert_eq!(stderr_json(&out)["category"], "precondition");
    assert_eq!(out.status.code(), Some(13));
}

#[test]
fn lyapunov_run_writes_tables_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "experiment = \"lyapunov\"\nseed = 7\n[params]\nsteps = 200\nwalks = 200\n").unwrap();
    let out = run(&["lyapunov", "--config", "c.toml", "--out", "a"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("a/lyapunov.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["estimator", "lambda", "std_error", "length", "samples"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let lambda: f64 = row[1].parse().unwrap();
        let se: f64 = row[2].parse().unwrap();
        assert!(lambda > 0.5 && lambda < 1.5 && se > 0.0, "{row:?}");
    }
    assert!(dir.path().join("a/lyapunov-spectrum.csv").exists());
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a/lyapunov.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["subcommand"], "lyapunov");
    assert_eq!(meta["input_hash"].as_str().unwrap().len(), 64);
    assert!(meta["config"].as_str().unwrap().contains("walks = 200"));

    // Same seed, same bytes; the seed override changes them.
    let again = run(&["lyapunov", "--config", "c.toml", "--out", "b", "--workers", "3"], dir.path());
    assert!(again.status.success());
    let a = std::fs::read(dir.path().join("a/lyapunov.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/lyapunov.csv")).unwrap());
    let meta_b: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("b/lyapunov.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["input_hash"], meta_b["input_hash"]);
    let other = run(&["lyapunov", "--config", "c.toml", "--out", "c", "--seed", "8"], dir.path());
    assert!(other.status.success());
    assert_ne!(a, std::fs::read(dir.path().join("c/lyapunov.csv")).unwrap());
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_renewal-lab"))
        .args(["stationary", "--seed", "1", "--quiet"])
        .current_dir(dir.path())
        .env("RENEWAL_LAB_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    for name in ["stationary.csv", "stationary-summary.csv", "stationary-eigenvalues.csv", "stationary.meta.json"] {
        assert!(dir.path().join("from-env").join(name).exists(), "{name}");
    }
}
