#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Outcome {
    pub code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.code == Some(0)
    }
}

pub fn myograph(args: &[&str]) -> Outcome {
    myograph_env(args, &[])
}

pub fn myograph_env(args: &[&str], env: &[(&str, &str)]) -> Outcome {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_myograph"));
    cmd.args(args).env_remove("MYOGRAPH_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Outcome {
        code: out.status.code(),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a synth spec and generates its trial, returning `(csv, json)`.
pub fn synth_trial(dir: &Path, spec_json: &str) -> (PathBuf, PathBuf) {
    let spec = dir.join("spec.json");
    std::fs::write(&spec, spec_json).unwrap();
    let out = dir.join("trial");
    let r = myograph(&["synth", "--spec", s(&spec), "--out", s(&out)]);
    assert!(r.ok(), "{}", r.stderr);
    let csv = r.stdout.lines().find(|l| l.ends_with(".csv")).unwrap();
    let json = r.stdout.lines().find(|l| l.ends_with(".json")).unwrap();
    (
        PathBuf::from(csv.trim_start_matches("wrote ")),
        PathBuf::from(json.trim_start_matches("wrote ")),
    )
}

pub fn stationary_spec(cv: f64, duration: f64, seed: u64) -> String {
    format!(
        r#"{{
  "cv_profile": {cv},
  "spectral_shape": {{"center_hz": 120, "width_hz": 40}},
  "amplitude_profile": 0.5,
  "iz_sd_index": 5,
  "snr_db": 20,
  "duration_s": {duration},
  "seed": {seed}
}}"#
    )
}
