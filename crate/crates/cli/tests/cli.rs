use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tandem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tandem")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

const TINY: &str = r#"
id = "coingame"
horizon = 16
train_seeds = 1
eval_seeds = 2
conditions = ["multi", "noninfluence"]
probe_seeds = 1
probe_times = [0, 16]

[eval_set]
kind = "held_out"
partners = 5

[ppo]
num_envs = 4
num_steps = 16
num_minibatches = 2
seq_len = 8
grad_chunk = 2
total_timesteps = 128
"#;

fn write_config(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn reproduce_runs_a_tiny_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("runs");
    let o = tandem(&["reproduce", "coingame", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("coingame multi coingame seed 0"), "{stdout}");
    assert!(out.join("coingame/multi/coingame/0/manifest.json").exists());
    assert!(out.join("coingame/comparison.json").exists());

    let probe = tandem(&["probe", "--experiment", "coingame", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(probe.status.success(), "{}", String::from_utf8_lossy(&probe.stderr));
    let analyse = tandem(&["analyse", "--experiment", "coingame", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(analyse.status.success(), "{}", String::from_utf8_lossy(&analyse.stderr));
    assert!(String::from_utf8_lossy(&analyse.stdout).contains("pooled"));
}

#[test]
fn unknown_condition_exits_with_config_error() {
    let o = tandem(&["train", "--condition", "fancy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown condition"));
}

#[test]
fn eval_without_checkpoint_exits_with_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = tandem(&["eval", "--experiment", "coingame", "--config", &cfg, "--out", dir.path().join("empty").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = tandem(&["train", "--experiment", "exp1", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}
