use std::fs;
use std::process::{Command, Output};

fn qsnap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsnap")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = qsnap(&["run", "--method", "es", "--repr", "sv", "--qubits", "1-2", "--trials", "3", "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.csv", "summary.json", "config.json", "traces.json", "solutions.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("trial_id,seed,method,representation,n_qubits,mode,epochs@0.95,epochs@0.99,"));

    // The written config reproduces the run byte for byte.
    let again = dir.path().join("again");
    let o = qsnap(&["run", "--config", out.join("config.json").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read(out.join("results.csv")).unwrap(), fs::read(again.join("results.csv")).unwrap());

    let o = qsnap(&["entropy-report", "--run", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("circuit_id,n_qubits,partition"));
}

#[test]
fn noisy_flag_selects_noisy_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsnap(&["run", "--trials", "1", "--noise", "default", "--shots", "128", "--max-iters", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(dir.path().join("results.csv")).unwrap().contains("noisy(128)"));
}

#[test]
fn config_errors_exit_with_one() {
    assert_eq!(qsnap(&["run", "--qubits", "7", "--trials", "1"]).status.code(), Some(1));
    assert_eq!(qsnap(&["run", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(qsnap(&["run", "--method", "sgd"]).status.code(), Some(1));
    assert_eq!(qsnap(&["run", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(qsnap(&["reconstruct", "--target", "no-such-preset"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"trials\": }").unwrap();
    let o = qsnap(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert_eq!(qsnap(&["timing", "--t-d-cq", "-1", "--t-d-qc", "0", "--t-p-c", "0", "--tau-d", "1", "--iterations", "1"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsnap(&["snapshot", "get", "missing", "--store", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = qsnap(&["entropy-report", "--run", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reconstruct_and_snapshot_get() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().to_str().unwrap();
    let o = qsnap(&["reconstruct", "--target", "hadamard", "--store", store, "--label", "plus"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("epoch    1"));
    let o = qsnap(&["snapshot", "get", "plus", "--store", store]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["label"], "plus");
    assert_eq!(v["n_qubits"], 1);
    assert_eq!(v["created_from"]["method"], "es");
    // Labels are write-once.
    let o = qsnap(&["reconstruct", "--target", "hadamard", "--store", store, "--label", "plus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qsnap(&["snapshot", "list", "--store", store]);
    assert_eq!(stdout(&o).trim(), "plus");
}

#[test]
fn timing_examples() {
    let base = ["timing", "--t-d-cq", "0.00005", "--t-d-qc", "0.00003", "--t-p-c", "0.00002", "--tau-d", "0.001", "--margin", "1"];
    let o = qsnap(&[&base[..], &["--iterations", "5"]].concat());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("max iterations  : 10"), "{text}");
    assert!(text.contains("feasible        : yes"));
    let o = qsnap(&[&base[..], &["--iterations", "11"]].concat());
    assert!(stdout(&o).contains("feasible        : no"));
}

#[test]
fn noise_inspect_prints_parameters() {
    let o = qsnap(&["noise-inspect"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["0.001", "0.002", "0.02", "80 us", "100 us", "50 ns"] {
        assert!(text.contains(needle), "{needle}");
    }
    let o = qsnap(&["noise-inspect", "--noise", "none", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["channels"].as_array().unwrap().iter().all(|c| c["identity"] == true));
}
