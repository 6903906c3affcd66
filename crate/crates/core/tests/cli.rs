//! Binary-level checks of the command-line interface: exit codes, verb
//! plumbing, and the artifact layout of a minimal end-to-end run.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fvsim"))
}

const MINI_CONFIG: &str = r#"
[geometry]
rows = 2
cols = 2

[model]
g = 1.0
h0 = 0.1
hq = -0.2

[initial_state]
kind = "fv_ground"

[dmrg]
chi_dmrg = 16

[evolution]
dt = 0.05
t_max = 0.5
chi_q = 16

[sampling]
times = [0.5]
n_shots = 20
seed = 3

[output]
dir = "out"
"#;

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = bin().arg(flag).output().expect("spawn");
        assert_eq!(out.status.code(), Some(0), "{flag}");
    }
    let out = bin().args(["evolve", "--help"]).output().expect("spawn");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_verb_exits_one() {
    let out = bin().arg("frobnicate").output().expect("spawn");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_file_exits_one() {
    let out = bin().args(["prepare", "--config", "/nonexistent/run.toml"]).output().expect("spawn");
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty(), "expected an error message on stderr");
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, MINI_CONFIG.replace("rows = 2", "rows = 2\nwheels = 4")).unwrap();
    let out = bin().args(["prepare", "--config"]).arg(&path).output().expect("spawn");
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("config"), "stderr should name the config problem: {stderr}");
}

#[test]
fn reproduce_rejects_unknown_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["reproduce", "fig9", "--scale", "2", "--out"])
        .arg(dir.path())
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evolve_sample_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, MINI_CONFIG).unwrap();
    let out_dir = dir.path().join("run");

    let out = bin()
        .args(["evolve", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .expect("spawn");
    assert_eq!(
        out.status.code(),
        Some(0),
        "evolve failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["initial.fvs", "trajectory.csv", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let shot_file = fs::read_dir(&out_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("shots_"))
        .expect("a shot file");

    // Re-sample the prepared state directly and run the analysis verb on
    // the pipeline's shot file.
    let resample = dir.path().join("resample.txt");
    let out = bin()
        .args(["sample", "--state"])
        .arg(out_dir.join("initial.fvs"))
        .args(["--shots", "10", "--seed", "3", "--out"])
        .arg(&resample)
        .output()
        .expect("spawn");
    assert_eq!(
        out.status.code(),
        Some(0),
        "sample failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(resample.exists());

    let stats = dir.path().join("stats");
    let out = bin()
        .arg("analyze")
        .arg(&shot_file)
        .args(["--reference", "up", "--out"])
        .arg(&stats)
        .output()
        .expect("spawn");
    assert_eq!(
        out.status.code(),
        Some(0),
        "analyze failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["n_of_s.csv", "p_smax.csv", "hamming.csv", "pmax_heatmap.csv"] {
        assert!(stats.join(name).exists(), "missing {name}");
    }
}
