use std::path::Path;
use std::process::{Command, Output};

fn qsync(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qsync"));
    cmd.args(args).env_remove("QSYNC_OUTPUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("QSYNC_OUTPUT_DIR", dir);
    }
    cmd.output().unwrap()
}

const TINY: &str = r#"
name = "tiny"
noise_kind = "quantum-homodyne"
ensemble_size = 6

[model]
n = 4
gamma = 1.0
measured_site = 2

[initial]
kind = "superposition"

[[initial.terms]]
block = "basis"
basis = "0111"
amplitude = [1.0, 0.0]

[integrator]
t_final = 2.0
dt = 1e-3
seed = 5

[analysis]
lindblad = false

[outputs]
dir = "ignored-by-tests"
trajectories = 2
"#;

#[test]
fn presets_list_names_every_preset() {
    let out = qsync(&["presets", "list"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1", "fig1-superposition", "fig2", "fig3a", "fig3c", "zeno"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn presets_show_prints_parseable_toml() {
    let out = qsync(&["presets", "show", "zeno"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(qsync_core::scenario::ScenarioConfig::from_toml(&text).is_ok());
}

#[test]
fn analyze_reports_json() {
    let out = qsync(&["analyze", "--n", "4", "--site", "2"], None);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["hilbert_dim"], 16);
    let dims: usize = v["dims"].as_array().unwrap().iter().map(|d| d.as_u64().unwrap() as usize).sum();
    assert_eq!(dims + v["complement_dim"].as_u64().unwrap() as usize, 16);
}

#[test]
fn configuration_errors_exit_with_2() {
    let out = qsync(&["run", "no-such-scenario"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = qsync(&["analyze", "--n", "4", "--site", "9"], None);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, TINY.replace("ensemble_size = 6", "ensemble_size = 6\nmystery = 1")).unwrap();
    let out = qsync(&["run", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    // a literal Euler step overflows at this strength even after halving
    let text = TINY
        .replace("dt = 1e-3", "dt = 0.5\nsample_every = 0.5\nscheme = \"euler-maruyama\"")
        .replace("gamma = 1.0", "gamma = 1e300");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = qsync(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_honours_the_output_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let target = dir.path().join("from-env");
    let out = qsync(&["run", cfg.to_str().unwrap()], Some(&target));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.json", "manifest.json", "trajectory_0000.csv", "trajectory_0001.csv"] {
        assert!(target.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(target.join("trajectory_0000.csv")).unwrap();
    assert!(csv.starts_with("time,site_1,site_2,site_3,site_4,overlap_"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(target.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["stream_ids"][0].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_sync_time_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsync(
        &[
            "sweep-sync-time",
            "zeno",
            "--gammas",
            "1,2",
            "--ensemble-size",
            "4",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("sync_time.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("gamma,count,mean_tau"));
    assert_eq!(lines.count(), 2);
}
