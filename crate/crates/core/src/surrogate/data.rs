use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dual::Pose;
use crate::curriculum::{FlowField, FlowKey, FlowSet};
use crate::difficulty::{analyze_dataset, DatasetStats, DifficultyConfig, DifficultyManifest, UNIFORM_WEIGHTS};
use crate::error::{Error, Result};
use crate::geometry::RigidPose;
use crate::parallel::Execution;
use crate::trajectory::Trajectory;

/// Poses per training window.
pub const WINDOW_LEN: usize = 10;
/// Consecutive windows share one pose.
pub const WINDOW_STRIDE: usize = WINDOW_LEN - 1;
/// Seconds between frames.
pub const FRAME_DT: f64 = 0.1;

/// Pinhole camera looking at a fronto-parallel plane, sampled on a square grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Camera {
    /// Pixels.
    pub focal: f64,
    pub grid: usize,
    /// Pixels between grid samples.
    pub spacing: f64,
    /// Meters.
    pub depth: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            focal: 40.0,
            grid: 8,
            spacing: 8.0,
            depth: 2.0,
        }
    }
}

impl Camera {
    fn image_size(&self) -> f64 {
        self.grid as f64 * self.spacing
    }

    /// Pixel coordinates of the grid samples, row-major.
    pub fn pixels(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.grid * self.grid);
        for r in 0..self.grid {
            for c in 0..self.grid {
                out.push([(c as f64 + 0.5) * self.spacing, (r as f64 + 0.5) * self.spacing]);
            }
        }
        out
    }

    /// Rows of the 2x6 interaction matrix at every sample, acting on `(omega, v)`.
    pub fn interaction(&self) -> Vec<[[f64; 6]; 2]> {
        let c = self.image_size() / 2.0;
        let (f, z) = (self.focal, self.depth);
        self.pixels()
            .into_iter()
            .map(|[u, v]| {
                let (x, y) = ((u - c) / f, (v - c) / f);
                [
                    [f * x * y, -f * (1.0 + x * x), f * y, -f / z, 0.0, f * x / z],
                    [f * (1.0 + y * y), -f * x * y, -f * x, 0.0, -f / z, f * y / z],
                ]
            })
            .collect()
    }

    /// Flow for every `(frame, offset)` pair inside the window.
    ///
    /// With `mask_out_of_view`, samples whose flow leaves the image are invalid.
    pub fn window_flows(&self, poses: &[Pose<f64>], mask_out_of_view: bool) -> FlowSet {
        let a_rows = self.interaction();
        let pixels = self.pixels();
        let size = self.image_size();
        let mut set = FlowSet::new();
        for a in 0..poses.len() {
            for off in FlowKey::OFFSETS {
                let b = a as i64 + off as i64;
                if b < 0 || b >= poses.len() as i64 {
                    continue;
                }
                let (w, v) = poses[a].between(&poses[b as usize]).log();
                let psi = [w[0], w[1], w[2], v[0], v[1], v[2]];
                let vectors: Vec<[f64; 2]> = a_rows
                    .iter()
                    .map(|rows| rows.map(|r| r.iter().zip(&psi).map(|(x, y)| x * y).sum::<f64>()))
                    .collect();
                let valid = vectors
                    .iter()
                    .zip(&pixels)
                    .map(|(fl, px)| {
                        !mask_out_of_view || {
                            let (u, v) = (px[0] + fl[0], px[1] + fl[1]);
                            (0.0..size).contains(&u) && (0.0..size).contains(&v)
                        }
                    })
                    .collect();
                let field = FlowField::new(self.grid, self.grid, vectors, valid).expect("grid-sized field");
                set.insert(FlowKey::new(a, off).expect("window offset"), field);
            }
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_sequences: usize,
    pub windows_per_sequence: usize,
    /// Centers of the difficulty modes; sequences cycle through them.
    pub difficulty_modes: Vec<f64>,
    /// Half-width of the uniform spread around each mode.
    pub mode_spread: f64,
    /// Explicit per-sequence targets; overrides the modes and `n_sequences`.
    pub targets: Option<Vec<f64>>,
    /// Per-axis translation per frame at difficulty 1, meters.
    pub max_translation: f64,
    /// Per-axis rotation per frame at difficulty 1, radians.
    pub max_rotation: f64,
    /// Observation noise std is `obs_noise * (0.2 + score)`.
    pub obs_noise: f64,
    /// Relative Gaussian jitter on top of the smooth motion.
    pub jitter: f64,
    pub encoder_gain: f64,
    pub camera: Camera,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_sequences: 30,
            windows_per_sequence: 4,
            difficulty_modes: vec![0.1, 0.45, 0.7],
            mode_spread: 0.04,
            targets: None,
            max_translation: 0.1,
            max_rotation: 0.05,
            obs_noise: 0.1,
            jitter: 0.25,
            encoder_gain: 1.5,
            camera: Camera::default(),
        }
    }
}

impl DatasetSpec {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.targets.as_ref().map_or(self.n_sequences, Vec::len);
        if n < 3 {
            out.push(format!("dataset needs at least 3 sequences, got {n}"));
        }
        if self.windows_per_sequence == 0 {
            out.push("windows_per_sequence must be positive".into());
        }
        if self.targets.is_none() && self.difficulty_modes.is_empty() {
            out.push("difficulty_modes must not be empty".into());
        }
        let targets = self.targets.iter().flatten().chain(&self.difficulty_modes);
        if targets.clone().any(|t| !(0.0..=1.0).contains(t)) {
            out.push("difficulty targets must lie in [0, 1]".into());
        }
        for (name, v) in [
            ("max_translation", self.max_translation),
            ("max_rotation", self.max_rotation),
            ("encoder_gain", self.encoder_gain),
            ("camera.focal", self.camera.focal),
            ("camera.spacing", self.camera.spacing),
            ("camera.depth", self.camera.depth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive, got {v}"));
            }
        }
        // Worst-case rotation between the first and last pose of a window,
        // for ground truth plus a prediction at the output bound.
        if 2.5 * 3f64.sqrt() * self.max_rotation * WINDOW_STRIDE as f64 >= std::f64::consts::PI - 0.05 {
            out.push(format!("max_rotation {} lets window rotations approach pi", self.max_rotation));
        }
        for (name, v) in [
            ("mode_spread", self.mode_spread),
            ("obs_noise", self.obs_noise),
            ("jitter", self.jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.camera.grid == 0 {
            out.push("camera.grid must be positive".into());
        }
        out
    }

    /// Normalization ranges under which a sequence scores its requested target.
    pub fn reference_stats(&self) -> DatasetStats {
        let (t, r) = (self.max_translation, self.max_rotation);
        DatasetStats::new([0.0; 6], [t, t, t, r, r, r], UNIFORM_WEIGHTS).expect("positive ranges")
    }

    fn scales(&self) -> [f64; 6] {
        let (t, r) = (self.max_translation, self.max_rotation);
        [r, r, r, t, t, t]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub target: f64,
    pub trajectory: Trajectory,
    /// Per-frame motion `(omega, t)`: pose `k + 1` is pose `k` times `(exp(omega), t)`.
    pub steps: Vec<[f64; 6]>,
    /// Noisy encodings of `steps`.
    pub features: Vec<[f64; 6]>,
    /// Observation noise std used for this sequence.
    pub noise_std: f64,
}

impl SyntheticSequence {
    pub fn id(&self) -> &str {
        self.trajectory.sequence_id()
    }

    pub fn n_windows(&self) -> usize {
        self.steps.len() / WINDOW_STRIDE
    }

    pub fn window_poses(&self, w: usize) -> Vec<Pose<f64>> {
        self.trajectory.poses()[w * WINDOW_STRIDE..w * WINDOW_STRIDE + WINDOW_LEN]
            .iter()
            .map(Pose::from_rigid)
            .collect()
    }

    pub fn window_features(&self, w: usize) -> &[[f64; 6]] {
        &self.features[w * WINDOW_STRIDE..(w + 1) * WINDOW_STRIDE]
    }
}

/// Integrates per-frame motions from the identity.
pub fn integrate_steps(id: &str, steps: &[[f64; 6]]) -> Result<Trajectory> {
    let mut poses = Vec::with_capacity(steps.len() + 1);
    let mut cur = RigidPose::identity();
    poses.push(cur.with_timestamp(Some(0.0)));
    for (k, s) in steps.iter().enumerate() {
        let step = RigidPose::from_rotation_vector(Vector3::new(s[0], s[1], s[2]), Vector3::new(s[3], s[4], s[5]));
        cur = cur.compose(&step);
        poses.push(cur.with_timestamp(Some((k + 1) as f64 * FRAME_DT)));
    }
    Trajectory::new(id, poses)
}

/// Fixed nonlinear map from normalized motion to observation features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    mix: [[f64; 6]; 6],
    gain: f64,
    scales: [f64; 6],
}

impl FeatureEncoder {
    fn new(rng: &mut ChaCha8Rng, spec: &DatasetSpec) -> Self {
        let g = DMatrix::<f64>::from_fn(6, 6, |_, _| StandardNormal.sample(rng));
        let q = g.qr().q();
        Self {
            mix: std::array::from_fn(|r| std::array::from_fn(|c| q[(r, c)])),
            gain: spec.encoder_gain,
            scales: spec.scales(),
        }
    }

    /// `tanh(gain * Q (m / M))`.
    pub fn encode(&self, m: &[f64; 6]) -> [f64; 6] {
        let n: Vec<f64> = m.iter().zip(&self.scales).map(|(x, s)| x / s).collect();
        std::array::from_fn(|r| (self.gain * self.mix[r].iter().zip(&n).map(|(a, b)| a * b).sum::<f64>()).tanh())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub spec: DatasetSpec,
    pub sequences: Vec<SyntheticSequence>,
    /// Scored by the difficulty pipeline, in sequence order.
    pub manifest: DifficultyManifest,
    pub encoder: FeatureEncoder,
}

fn sequence_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn requested_targets(spec: &DatasetSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if let Some(t) = &spec.targets {
        return t.clone();
    }
    let m = spec.difficulty_modes.len();
    (0..spec.n_sequences)
        .map(|i| {
            let c = spec.difficulty_modes[i % m];
            let d = if spec.mode_spread > 0.0 {
                rng.random_range(-spec.mode_spread..=spec.mode_spread)
            } else {
                0.0
            };
            (c + d).clamp(0.0, 1.0)
        })
        .collect()
}

/// Per-axis sinusoids plus jitter, each axis rescaled so its peak is `target * M`.
fn generate_steps(target: f64, n_steps: usize, spec: &DatasetSpec, rng: &mut ChaCha8Rng) -> Vec<[f64; 6]> {
    let mut steps = vec![[0.0; 6]; n_steps];
    let scales = spec.scales();
    for (a, scale) in scales.iter().enumerate() {
        let freq = rng.random_range(0.5..2.5);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let raw: Vec<f64> = (0..n_steps)
            .map(|k| {
                let j: f64 = StandardNormal.sample(rng);
                (std::f64::consts::TAU * freq * k as f64 / n_steps as f64 + phase).sin() + spec.jitter * j
            })
            .collect();
        let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 && target > 0.0 {
            let k = target * scale / peak;
            for (s, r) in steps.iter_mut().zip(raw) {
                s[a] = r * k;
            }
        }
    }
    steps
}

/// Builds the dataset and scores it with the difficulty pipeline.
pub fn generate_dataset(spec: &DatasetSpec, seed: u64, exec: Execution) -> Result<SyntheticDataset> {
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(Error::InvalidInput(problems.join("; ")));
    }
    let mut rng = sequence_rng(seed, 0);
    let encoder = FeatureEncoder::new(&mut rng, spec);
    let targets = requested_targets(spec, &mut rng);
    let n_steps = spec.windows_per_sequence * WINDOW_STRIDE;
    let drafts: Vec<Result<(f64, Vec<[f64; 6]>, Trajectory)>> = exec.map_range(targets.len(), |i| {
        let mut rng = sequence_rng(seed, 1 + 2 * i as u64);
        let steps = generate_steps(targets[i], n_steps, spec, &mut rng);
        let traj = integrate_steps(&format!("seq_{i:04}"), &steps)?;
        Ok((targets[i], steps, traj))
    });
    let drafts = drafts.into_iter().collect::<Result<Vec<_>>>()?;
    let trajs: Vec<Trajectory> = drafts.iter().map(|d| d.2.clone()).collect();
    let cfg = DifficultyConfig {
        reference_stats: Some(spec.reference_stats()),
        ..Default::default()
    };
    let manifest = analyze_dataset(&trajs, &cfg, exec)?;
    let sequences = exec.map_range(drafts.len(), |i| {
        let (target, steps, trajectory) = drafts[i].clone();
        let noise_std = spec.obs_noise * (0.2 + manifest.entries[i].normalized);
        let mut rng = sequence_rng(seed, 2 + 2 * i as u64);
        let normal = (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).expect("finite std"));
        let features = steps
            .iter()
            .map(|m| {
                let mut x = encoder.encode(m);
                if let Some(n) = &normal {
                    for v in &mut x {
                        *v += n.sample(&mut rng);
                    }
                }
                x
            })
            .collect();
        SyntheticSequence {
            target,
            trajectory,
            steps,
            features,
            noise_std,
        }
    });
    Ok(SyntheticDataset {
        spec: spec.clone(),
        sequences,
        manifest,
        encoder,
    })
}

/// Train/validation indices, stratified by level; both sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

pub fn stratified_split(manifest: &DifficultyManifest, fraction: f64, seed: u64) -> Split {
    let mut rng = sequence_rng(seed, u64::MAX);
    let mut val = Vec::new();
    let max_level = manifest.entries.iter().map(|e| e.level).max().unwrap_or(0);
    for level in 1..=max_level {
        let mut members: Vec<usize> = (0..manifest.entries.len())
            .filter(|i| manifest.entries[*i].level == level)
            .collect();
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut rng);
        let k = ((members.len() as f64 * fraction).round() as usize).min(members.len().saturating_sub(1));
        val.extend_from_slice(&members[..k]);
    }
    val.sort_unstable();
    let train = (0..manifest.entries.len()).filter(|i| val.binary_search(i).is_err()).collect();
    Split { train, val }
}
