//! Trajectory text formats.
//!
//! * TUM: `timestamp tx ty tz qx qy qz qw` per line, `#` comments allowed.
//! * TartanAir: `tx ty tz qx qy qz qw` per line; the frame index is the timestamp.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::RigidPose;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    Tum,
    Tartanair,
}

impl TrajectoryFormat {
    fn fields(self) -> usize {
        match self {
            TrajectoryFormat::Tum => 8,
            TrajectoryFormat::Tartanair => 7,
        }
    }
}

impl FromStr for TrajectoryFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tum" => Ok(TrajectoryFormat::Tum),
            "tartanair" => Ok(TrajectoryFormat::Tartanair),
            other => Err(Error::InvalidInput(format!("unknown trajectory format '{other}'"))),
        }
    }
}

const QUAT_NORM_RANGE: (f64, f64) = (0.9, 1.1);

pub fn parse_trajectory(text: &str, format: TrajectoryFormat, sequence_id: &str) -> Result<Trajectory> {
    let mut poses = Vec::new();
    let mut last_stamp: Option<f64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != format.fields() {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: format!("expected {} fields, found {}", format.fields(), fields.len()),
            });
        }
        let mut values = [0.0f64; 8];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedLine {
                    line: line_no,
                    reason: format!("not a finite number: '{field}'"),
                })?;
        }
        let (stamp, rest) = match format {
            TrajectoryFormat::Tum => (values[0], &values[1..8]),
            TrajectoryFormat::Tartanair => (poses.len() as f64, &values[0..7]),
        };
        if stamp < 0.0 {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: format!("negative timestamp {stamp}"),
            });
        }
        if let Some(prev) = last_stamp {
            if stamp <= prev {
                return Err(Error::NonMonotonicTimestamps {
                    line: line_no,
                    timestamp: stamp,
                });
            }
        }
        last_stamp = Some(stamp);

        let (qx, qy, qz, qw) = (rest[3], rest[4], rest[5], rest[6]);
        let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
        if !(QUAT_NORM_RANGE.0..=QUAT_NORM_RANGE.1).contains(&norm) {
            return Err(Error::BadQuaternion { line: line_no, norm });
        }
        let pose = RigidPose::from_wxyz(qw, qx, qy, qz, Vector3::new(rest[0], rest[1], rest[2]))
            .expect("norm checked above")
            .with_timestamp(Some(stamp));
        poses.push(pose);
    }
    if poses.is_empty() {
        return Err(Error::EmptyInput(format!("no poses in '{sequence_id}'")));
    }
    Trajectory::new(sequence_id, poses)
}

pub fn read_trajectory(path: &Path, format: TrajectoryFormat) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_trajectory(&text, format, &id)
}

/// Serializes with shortest round-trip float formatting, so parsing the
/// output reproduces the poses exactly (up to quaternion renormalization).
pub fn format_trajectory(traj: &Trajectory, format: TrajectoryFormat) -> String {
    let mut out = String::new();
    if format == TrajectoryFormat::Tum {
        out.push_str("# timestamp tx ty tz qx qy qz qw\n");
    }
    for (i, p) in traj.poses().iter().enumerate() {
        let t = p.translation();
        let [qw, qx, qy, qz] = p.quaternion_wxyz();
        if format == TrajectoryFormat::Tum {
            let stamp = p.timestamp().unwrap_or(i as f64);
            let _ = write!(out, "{stamp} ");
        }
        let _ = writeln!(out, "{} {} {} {} {} {} {}", t.x, t.y, t.z, qx, qy, qz, qw);
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, format: TrajectoryFormat) -> Result<()> {
    std::fs::write(path, format_trajectory(traj, format))?;
    Ok(())
}
