//! Motion-complexity scoring of whole sequences.
//!
//! Each sequence is reduced to six per-axis maxima of frame-to-frame motion
//! (three translation, three rotation-vector components). Maxima are min-max
//! normalized against dataset statistics, averaged with per-component
//! weights, and the resulting scores are split into equal-count levels.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::{relative_pose, so3_log};
use crate::parallel::Execution;
use crate::trajectory::Trajectory;

pub const COMPONENTS: usize = 6;

pub const COMPONENT_NAMES: [&str; COMPONENTS] = ["max_tx", "max_ty", "max_tz", "max_rx", "max_ry", "max_rz"];

/// Per-axis maxima of absolute frame-to-frame motion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionProfile {
    /// meters
    pub max_trans: [f64; 3],
    /// radians
    pub max_rot: [f64; 3],
}

impl MotionProfile {
    pub fn components(&self) -> [f64; COMPONENTS] {
        let [tx, ty, tz] = self.max_trans;
        let [rx, ry, rz] = self.max_rot;
        [tx, ty, tz, rx, ry, rz]
    }

    pub fn from_components(c: [f64; COMPONENTS]) -> Self {
        Self {
            max_trans: [c[0], c[1], c[2]],
            max_rot: [c[3], c[4], c[5]],
        }
    }

    pub fn is_static(&self) -> bool {
        self.components().iter().all(|c| *c == 0.0)
    }
}

/// Consecutive-frame motion maxima of one trajectory.
pub fn motion_profile(traj: &Trajectory) -> Result<MotionProfile> {
    traj.require_len(2)?;
    let mut out = [0.0f64; COMPONENTS];
    for pair in traj.poses().windows(2) {
        if pair[0].rotation() == pair[1].rotation() && pair[0].translation() == pair[1].translation() {
            continue;
        }
        let rel = relative_pose(&pair[0], &pair[1]);
        let t = rel.translation();
        let w = so3_log(rel.rotation());
        let step = [t.x, t.y, t.z, w.x, w.y, w.z];
        for (m, s) in out.iter_mut().zip(step) {
            *m = m.max(s.abs());
        }
    }
    Ok(MotionProfile::from_components(out))
}

/// Normalization ranges and combination weights for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    min: [f64; COMPONENTS],
    max: [f64; COMPONENTS],
    weights: [f64; COMPONENTS],
}

pub const UNIFORM_WEIGHTS: [f64; COMPONENTS] = [1.0 / 6.0; COMPONENTS];

fn normalized_weights(weights: [f64; COMPONENTS]) -> Result<[f64; COMPONENTS]> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidInput(format!("component weights must be finite and >= 0: {weights:?}")));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidInput("component weights sum to zero".into()));
    }
    Ok(weights.map(|w| w / sum))
}

impl DatasetStats {
    /// Weights are rescaled to sum to one.
    pub fn new(min: [f64; COMPONENTS], max: [f64; COMPONENTS], weights: [f64; COMPONENTS]) -> Result<Self> {
        for k in 0..COMPONENTS {
            if !(min[k].is_finite() && max[k].is_finite() && min[k] <= max[k]) {
                return Err(Error::InvalidInput(format!(
                    "component {}: min {} > max {}",
                    COMPONENT_NAMES[k], min[k], max[k]
                )));
            }
        }
        Ok(Self {
            min,
            max,
            weights: normalized_weights(weights)?,
        })
    }

    pub fn from_profiles(profiles: &[MotionProfile], weights: [f64; COMPONENTS]) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::EmptyInput("no motion profiles".into()));
        }
        let mut min = [f64::INFINITY; COMPONENTS];
        let mut max = [f64::NEG_INFINITY; COMPONENTS];
        for p in profiles {
            for (k, c) in p.components().into_iter().enumerate() {
                min[k] = min[k].min(c);
                max[k] = max[k].max(c);
            }
        }
        Self::new(min, max, weights)
    }

    pub fn min(&self) -> &[f64; COMPONENTS] {
        &self.min
    }

    pub fn max(&self) -> &[f64; COMPONENTS] {
        &self.max
    }

    pub fn weights(&self) -> &[f64; COMPONENTS] {
        &self.weights
    }
}

/// Weighted average of clamped min-max normalized components, in `[0, 1]`.
pub fn difficulty_score(profile: &MotionProfile, stats: &DatasetStats) -> f64 {
    let score: f64 = profile
        .components()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let span = stats.max[k] - stats.min[k];
            let n = if span > 0.0 {
                ((c - stats.min[k]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            stats.weights[k] * n
        })
        .sum();
    score.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyScore {
    pub sequence_id: String,
    pub raw: MotionProfile,
    pub normalized: f64,
    /// 1-based difficulty level.
    pub level: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// `n_levels - 1` increasing cut points.
    pub thresholds: Vec<f64>,
    /// Level per input item, input order.
    pub levels: Vec<u8>,
}

/// Splits scores into `n_levels` equal-count groups (sizes differ by at most one).
///
/// Items are ordered by score, then by id; thresholds sit midway between the
/// last score of one group and the first score of the next.
pub fn partition_levels<S: AsRef<str>>(scores: &[(S, f64)], n_levels: usize) -> Result<Partition> {
    if n_levels == 0 || n_levels > u8::MAX as usize {
        return Err(Error::InvalidInput(format!("n_levels must be in 1..=255, got {n_levels}")));
    }
    if scores.len() < n_levels {
        return Err(Error::TooFewSequences {
            needed: n_levels,
            got: scores.len(),
        });
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .1
            .total_cmp(&scores[b].1)
            .then_with(|| scores[a].0.as_ref().cmp(scores[b].0.as_ref()))
    });
    let bound = |g: usize| g * n / n_levels;
    let mut levels = vec![0u8; n];
    let mut thresholds = Vec::with_capacity(n_levels - 1);
    for g in 0..n_levels {
        for &idx in &order[bound(g)..bound(g + 1)] {
            levels[idx] = (g + 1) as u8;
        }
        if g + 1 < n_levels {
            let last = scores[order[bound(g + 1) - 1]].1;
            let next = scores[order[bound(g + 1)]].1;
            thresholds.push(0.5 * (last + next));
        }
    }
    Ok(Partition { thresholds, levels })
}

/// Level from fixed cut points: `1 + #{t in thresholds : t <= score}`.
pub fn assign_fixed_levels(scores: &[f64], thresholds: &[f64]) -> Result<Vec<u8>> {
    if thresholds.windows(2).any(|w| w[0] >= w[1]) || thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput(format!("thresholds must be finite and increasing: {thresholds:?}")));
    }
    Ok(scores
        .iter()
        .map(|s| 1 + thresholds.iter().filter(|t| **t <= *s).count() as u8)
        .collect())
}

#[derive(Debug, Clone)]
pub struct DifficultyConfig {
    pub weights: [f64; COMPONENTS],
    pub n_levels: usize,
    /// Pins the level cut points instead of using equal-count quantiles.
    pub fixed_thresholds: Option<Vec<f64>>,
    /// Normalization ranges to use instead of the dataset's own min/max.
    pub reference_stats: Option<DatasetStats>,
}

impl Default for DifficultyConfig {
    fn default() -> Self {
        Self {
            weights: UNIFORM_WEIGHTS,
            n_levels: 3,
            fixed_thresholds: None,
            reference_stats: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyManifest {
    /// Input order.
    pub entries: Vec<DifficultyScore>,
    pub thresholds: Vec<f64>,
    pub stats: DatasetStats,
}

impl DifficultyManifest {
    pub fn level_of(&self, sequence_id: &str) -> Option<u8> {
        self.entries.iter().find(|e| e.sequence_id == sequence_id).map(|e| e.level)
    }

    pub fn level_sizes(&self, n_levels: usize) -> Vec<usize> {
        let mut sizes = vec![0; n_levels];
        for e in &self.entries {
            if let Some(s) = sizes.get_mut(e.level as usize - 1) {
                *s += 1;
            }
        }
        sizes
    }
}

/// Profiles every trajectory (in parallel), then normalizes and partitions.
pub fn analyze_dataset(trajs: &[Trajectory], config: &DifficultyConfig, exec: Execution) -> Result<DifficultyManifest> {
    let profiles = exec
        .map(trajs, motion_profile)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    analyze_profiles(trajs.iter().map(|t| t.sequence_id().to_string()).collect(), profiles, config)
}

pub fn analyze_profiles(
    ids: Vec<String>,
    profiles: Vec<MotionProfile>,
    config: &DifficultyConfig,
) -> Result<DifficultyManifest> {
    if ids.len() < config.n_levels {
        return Err(Error::TooFewSequences {
            needed: config.n_levels,
            got: ids.len(),
        });
    }
    let stats = match &config.reference_stats {
        Some(s) => s.clone(),
        None => DatasetStats::from_profiles(&profiles, config.weights)?,
    };
    let scored: Vec<(String, f64)> = ids
        .into_iter()
        .zip(&profiles)
        .map(|(id, p)| (id, difficulty_score(p, &stats)))
        .collect();
    let (thresholds, levels) = match &config.fixed_thresholds {
        Some(t) => {
            if t.len() + 1 != config.n_levels {
                return Err(Error::InvalidInput(format!(
                    "{} thresholds given for {} levels",
                    t.len(),
                    config.n_levels
                )));
            }
            let scores: Vec<f64> = scored.iter().map(|s| s.1).collect();
            (t.clone(), assign_fixed_levels(&scores, t)?)
        }
        None => {
            let p = partition_levels(&scored, config.n_levels)?;
            (p.thresholds, p.levels)
        }
    };
    let entries = scored
        .into_iter()
        .zip(profiles)
        .zip(levels)
        .map(|(((sequence_id, normalized), raw), level)| DifficultyScore {
            sequence_id,
            raw,
            normalized,
            level,
        })
        .collect();
    Ok(DifficultyManifest {
        entries,
        thresholds,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins over `[0, 1]`; the last bin is closed.
pub fn histogram(scores: &[f64], bins: usize) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    for s in scores {
        let idx = ((s.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: k as f64 / bins as f64,
            hi: (k + 1) as f64 / bins as f64,
            count,
        })
        .collect()
}

pub const MANIFEST_HEADER: [&str; 9] = [
    "sequence_id", "max_tx", "max_ty", "max_tz", "max_rx", "max_ry", "max_rz", "score", "level",
];

pub fn write_manifest_csv<W: Write>(entries: &[DifficultyScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MANIFEST_HEADER)?;
    for e in entries {
        let mut row = vec![e.sequence_id.clone()];
        row.extend(e.raw.components().iter().map(|c| c.to_string()));
        row.push(e.normalized.to_string());
        row.push(e.level.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest_csv<R: Read>(input: R) -> Result<Vec<DifficultyScore>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != MANIFEST_HEADER {
        return Err(Error::InvalidInput(format!("unexpected manifest header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|_| Error::MalformedLine {
                line: i + 2,
                reason: format!("bad number '{}'", &rec[k]),
            })
        };
        let mut comps = [0.0; COMPONENTS];
        for (k, c) in comps.iter_mut().enumerate() {
            *c = num(k + 1)?;
        }
        let level = rec[8].parse::<u8>().map_err(|_| Error::MalformedLine {
            line: i + 2,
            reason: format!("bad level '{}'", &rec[8]),
        })?;
        out.push(DifficultyScore {
            sequence_id: rec[0].to_string(),
            raw: MotionProfile::from_components(comps),
            normalized: num(7)?,
            level,
        });
    }
    Ok(out)
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for b in bins {
        w.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
