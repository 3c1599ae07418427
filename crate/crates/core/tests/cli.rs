use std::fs;
use std::path::Path;
use std::process::Command;

fn spls() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spls"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = "n_iters = 400\nn_seeds = 3\ncheckpoints = []\n[log]\nstride = 50\n";

#[test]
fn run_writes_artifacts_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for out in ["a", "b"] {
        let status = spls()
            .args(["run", "-c"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for f in ["trajectories.csv", "summary.json", "phase_report.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs between identical runs");
    }
}

#[test]
fn one_iteration_gives_initial_and_first_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let ok = spls()
        .args(["run", "--n-iters", "1", "--n-seeds", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(ok.success());
    let csv = fs::read_to_string(out.join("trajectories.csv")).unwrap();
    let iters: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(iters, ["0", "0", "0", "0", "1", "1", "1", "1"]);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let ok = spls()
        .args(["run", "-c"])
        .arg(&cfg)
        .args(["--n-seeds", "2", "--n-iters", "10", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(ok.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_seeds"], 2);
    assert_eq!(summary["n_iters"], 10);
    assert_eq!(summary["gha"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "n_iters = 0\n");
    let out = spls().args(["run", "-c"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_iters"));

    let out = spls().args(["run", "--init", "saddle:9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // ε too small for the default step size
    let out = spls().args(["predict", "--epsilon", "0.01"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step size too large"));

    let out = spls().args(["predict"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let p: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(p["n1"], 2622);
}

#[test]
fn landscape_and_compare() {
    let out = spls().arg("landscape").output().unwrap();
    assert!(out.status.success());
    let pts: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let kinds: Vec<&str> = pts
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["global_optimum_stable", "saddle_unstable", "saddle_unstable"]);

    let dir = tempfile::tempdir().unwrap();
    let ok = spls()
        .args(["compare", "--n-iters", "300", "--n-seeds", "2", "--init", "random", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(ok.success());
    let c: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("comparison.json")).unwrap()).unwrap();
    for s in c["seeds"].as_array().unwrap() {
        assert_eq!(s["checksum_gha"], s["checksum_msg"]);
    }
    let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert!(csv.starts_with("iter,algorithm,gap,seed\n"));
}

#[test]
fn oujudge_reads_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n_iters = 100\nn_seeds = 30\n[log]\nstride = 100\nh = [1, 2]\n",
    );
    let out = dir.path().join("o");
    assert!(spls().args(["run", "-c"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let ok = spls()
        .arg("oujudge")
        .arg(out.join("summary.json"))
        .arg("--config")
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(ok.success());
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ou_report.json")).unwrap()).unwrap();
    let iters: Vec<u64> = r["checkpoints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["iter"].as_u64().unwrap())
        .collect();
    assert_eq!(iters, [10, 100]);

    let few = write_config(dir.path(), "n_iters = 20\nn_seeds = 5\n");
    let out2 = dir.path().join("p");
    assert!(spls().args(["run", "-c"]).arg(&few).arg("--out").arg(&out2).status().unwrap().success());
    let res = spls().arg("oujudge").arg(out2.join("summary.json")).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}
