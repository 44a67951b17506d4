#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curvo::io::{write_trajectory, TrajectoryFormat};
use curvo::{RigidPose, Trajectory};
use nalgebra::Vector3;
use rand::Rng;

pub fn curvo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvo")).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of `key` in a `key value` report line.
pub fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no '{key}' in report:\n{report}"))
        .to_string()
}

/// Every file under `dir` keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Constant per-frame motion: translation `m` and rotation `m / 2` on every axis.
pub fn constant_motion(id: &str, m: f64, n: usize) -> Trajectory {
    let step = RigidPose::from_rotation_vector(Vector3::repeat(0.5 * m), Vector3::repeat(m));
    let mut pose = RigidPose::identity();
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        poses.push(pose.with_timestamp(Some(i as f64 * 0.1)));
        pose = pose.compose(&step);
    }
    Trajectory::new(id, poses).unwrap()
}

pub fn random_walk<R: Rng>(id: &str, n: usize, rng: &mut R) -> Trajectory {
    let mut pose = RigidPose::identity();
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        poses.push(pose.with_timestamp(Some(i as f64 * 0.05)));
        let w = Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
        let v = Vector3::from_fn(|_, _| rng.random_range(-0.2..0.2));
        pose = pose.compose(&RigidPose::from_rotation_vector(w, v));
    }
    Trajectory::new(id, poses).unwrap()
}

pub fn write_tum(dir: &Path, traj: &Trajectory) -> PathBuf {
    let p = dir.join(format!("{}.tum", traj.sequence_id()));
    write_trajectory(&p, traj, TrajectoryFormat::Tum).unwrap();
    p
}

/// Small, fast training config.
pub const SMALL_TRAIN: &str = "\
[train]
steps = 200
hidden = [8, 8]
validation_every = 50

[train.dataset]
n_sequences = 9
windows_per_sequence = 2
";

pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.in.toml");
    std::fs::write(&p, text).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs every command once into `out` (wiped first) and returns all outputs plus the reports.
pub fn run_every_command(inputs: &Path, out: &Path) -> (BTreeMap<PathBuf, Vec<u8>>, String) {
    if out.exists() {
        std::fs::remove_dir_all(out).unwrap();
    }
    std::fs::create_dir_all(out).unwrap();
    let cfg = write_config(out, SMALL_TRAIN);
    let mut reports = String::new();
    let mut call = |args: &[&str]| -> String {
        let o = curvo(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let r = stdout(&o);
        reports.push_str(&r);
        r
    };
    let diff = out.join("difficulty");
    call(&["--out", s(&diff), "difficulty", s(inputs)]);
    let r = call(&["--config", s(&cfg), "--out", s(&out.join("runs")), "--seed", "3", "train", "--mode", "ddpg"]);
    let run = PathBuf::from(field(&r, "run_dir"));
    let eval = out.join("eval");
    let pred = run.join("validation/pred");
    let gt = run.join("validation/gt");
    let mut ids: Vec<PathBuf> = std::fs::read_dir(&gt).unwrap().map(|e| e.unwrap().path()).collect();
    ids.sort();
    for g in &ids {
        let p = pred.join(g.file_name().unwrap());
        call(&["--out", s(&eval), "evaluate", s(&p), s(g), "--align"]);
    }
    let plots = out.join("plots");
    for (csv, kind) in [
        (run.join("metrics.csv"), "training_curves"),
        (run.join("metrics.csv"), "weight_trace"),
        (diff.join("difficulty_manifest.csv"), "difficulty_hist"),
        (eval.join("errors.csv"), "auc_curve"),
    ] {
        call(&["--out", s(&plots), "plot", s(&csv), "--kind", kind]);
    }
    call(&["--config", s(&cfg), "--out", s(&out.join("inspect")), "agent-inspect", s(&run.join("agents.ckpt"))]);
    (snapshot(out), reports)
}

pub fn write_walks(dir: &Path, n: usize, seed: u64) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir).unwrap();
    for k in 0..n {
        write_tum(dir, &random_walk(&format!("walk{k:02}"), 40, &mut rng));
    }
}
