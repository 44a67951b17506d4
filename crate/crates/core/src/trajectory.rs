use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::RigidPose;

/// An ordered sequence of poses with an opaque identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    sequence_id: String,
    poses: Vec<RigidPose>,
}

impl Trajectory {
    /// Fails on an empty pose list or timestamps that do not strictly increase.
    pub fn new(sequence_id: impl Into<String>, poses: Vec<RigidPose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::EmptyInput("trajectory has no poses".into()));
        }
        let mut last: Option<f64> = None;
        for (i, p) in poses.iter().enumerate() {
            if let Some(t) = p.timestamp() {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::InvalidInput(format!("pose {i}: bad timestamp {t}")));
                }
                if let Some(prev) = last {
                    if t <= prev {
                        return Err(Error::NonMonotonicTimestamps { line: i + 1, timestamp: t });
                    }
                }
                last = Some(t);
            }
        }
        Ok(Self {
            sequence_id: sequence_id.into(),
            poses,
        })
    }

    pub fn sequence_id(&self) -> &str {
        &self.sequence_id
    }

    pub fn poses(&self) -> &[RigidPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(|p| *p.translation()).collect()
    }

    /// Same poses with every translation multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Trajectory {
        let poses = self
            .poses
            .iter()
            .map(|p| RigidPose::new(*p.rotation(), p.translation() * factor).with_timestamp(p.timestamp()))
            .collect();
        Trajectory {
            sequence_id: self.sequence_id.clone(),
            poses,
        }
    }

    /// Every pose left-multiplied by `motion`; timestamps kept.
    pub fn transformed(&self, motion: &RigidPose) -> Trajectory {
        let poses = self
            .poses
            .iter()
            .map(|p| motion.compose(p).with_timestamp(p.timestamp()))
            .collect();
        Trajectory {
            sequence_id: self.sequence_id.clone(),
            poses,
        }
    }

    pub(crate) fn require_len(&self, min: usize) -> Result<()> {
        if self.poses.len() < min {
            Err(Error::TooShort {
                len: self.poses.len(),
                min,
            })
        } else {
            Ok(())
        }
    }
}
