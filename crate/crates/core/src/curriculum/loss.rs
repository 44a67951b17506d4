use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{relative_pose, se3_log};
use crate::metrics::umeyama_align;
use crate::trajectory::Trajectory;

/// Range `[w0, w_final]` that curriculum weights interpolate over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    pub w0: f64,
    pub w_final: f64,
}

impl Default for WeightBounds {
    fn default() -> Self {
        Self { w0: 0.1, w_final: 1.0 }
    }
}

impl WeightBounds {
    pub fn new(w0: f64, w_final: f64) -> Result<Self> {
        if !(w0.is_finite() && w_final.is_finite() && w0 < w_final) {
            return Err(Error::InvalidInput(format!("weight bounds need w0 < w_final, got {w0} and {w_final}")));
        }
        Ok(Self { w0, w_final })
    }

    /// `w0 + (w_final - w0) * x`.
    pub fn interpolate(&self, x: f64) -> f64 {
        self.w0 + (self.w_final - self.w0) * x
    }

    pub fn contains(&self, w: f64) -> bool {
        (self.w0..=self.w_final).contains(&w)
    }
}

/// Curriculum weights for flow, pose and rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumWeights {
    pub flow: f64,
    pub pose: f64,
    pub rotation: f64,
}

impl CurriculumWeights {
    pub const UNIT: CurriculumWeights = CurriculumWeights {
        flow: 1.0,
        pose: 1.0,
        rotation: 1.0,
    };

    pub fn uniform(w: f64) -> Self {
        Self {
            flow: w,
            pose: w,
            rotation: w,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.flow, self.pose, self.rotation]
    }
}

/// Fixed magnitude-balancing scales for flow and pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseScales {
    pub flow: f64,
    pub pose: f64,
}

impl Default for BaseScales {
    fn default() -> Self {
        Self { flow: 0.1, pose: 10.0 }
    }
}

/// Unweighted loss components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub flow: f64,
    pub translation: f64,
    pub rotation: f64,
}

/// Loss components plus the weighted total they produced.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub flow: f64,
    pub translation: f64,
    pub rotation: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn parts(&self) -> LossParts {
        LossParts {
            flow: self.flow,
            translation: self.translation,
            rotation: self.rotation,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flow.is_finite() && self.translation.is_finite() && self.rotation.is_finite() && self.total.is_finite()
    }
}

/// `total = w_f s_f flow + w_p s_p (translation + w_r rotation)`.
pub fn hierarchical_total_loss(parts: &LossParts, w: &CurriculumWeights, s: &BaseScales) -> LossBreakdown {
    let pose = parts.translation + w.rotation * parts.rotation;
    let total = w.flow * s.flow * parts.flow + w.pose * s.pose * pose;
    LossBreakdown {
        flow: parts.flow,
        translation: parts.translation,
        rotation: parts.rotation,
        total,
    }
}

/// The fixed weighting `10 * pose + 0.1 * flow`.
pub fn baseline_total_loss(parts: &LossParts) -> f64 {
    let pose = parts.translation + parts.rotation;
    10.0 * pose + 0.1 * parts.flow
}

/// Pairwise relative-pose error split into its translational and rotational norms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseLoss {
    /// Sum of `|v|` over pairs.
    pub translation: f64,
    /// Sum of `|omega|` over pairs.
    pub rotation: f64,
    /// Sum of the full twist norm over pairs.
    pub joint: f64,
}

/// Accumulates `log((G_i^-1 G_j)^-1 (T_i^-1 T_j))` over all ordered pairs `i != j`.
///
/// With `align`, the prediction is first mapped onto the ground truth by a
/// Umeyama similarity so that monocular scale drops out.
pub fn pose_supervision_loss(pred: &Trajectory, gt: &Trajectory, align: bool) -> Result<PoseLoss> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            est: pred.len(),
            gt: gt.len(),
        });
    }
    pred.require_len(2)?;
    let aligned;
    let pred = if align {
        let sim = umeyama_align(pred, gt)?;
        aligned = sim.apply_trajectory(pred);
        &aligned
    } else {
        pred
    };
    let (p, g) = (pred.poses(), gt.poses());
    let mut out = PoseLoss::default();
    for i in 0..p.len() {
        for j in 0..p.len() {
            if i == j {
                continue;
            }
            let gt_rel = relative_pose(&g[i], &g[j]);
            let pred_rel = relative_pose(&p[i], &p[j]);
            let xi = se3_log(&relative_pose(&gt_rel, &pred_rel))?;
            out.translation += xi.v.norm();
            out.rotation += xi.omega.norm();
            out.joint += xi.norm();
        }
    }
    Ok(out)
}

/// Flow between `frame` and `frame + offset`, offset in `{-2, -1, 1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub frame: usize,
    pub offset: i8,
}

impl FlowKey {
    pub const OFFSETS: [i8; 4] = [-2, -1, 1, 2];

    pub fn new(frame: usize, offset: i8) -> Result<Self> {
        if !Self::OFFSETS.contains(&offset) {
            return Err(Error::InvalidInput(format!("flow offset {offset} outside the +-2 frame window")));
        }
        Ok(Self { frame, offset })
    }
}

/// A dense flow field in pixels with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub vectors: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, vectors: Vec<[f64; 2]>, valid: Vec<bool>) -> Result<Self> {
        if vectors.len() != width * height || valid.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} field with {} vectors and {} mask entries",
                width,
                height,
                vectors.len(),
                valid.len()
            )));
        }
        Ok(Self {
            width,
            height,
            vectors,
            valid,
        })
    }
}

pub type FlowSet = BTreeMap<FlowKey, FlowField>;

/// Mean L1 distance (`|dx| + |dy|`) over vectors valid in both sets.
pub fn flow_supervision_loss(pred: &FlowSet, gt: &FlowSet) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::EmptyInput("no ground-truth flow fields".into()));
    }
    if pred.len() != gt.len() || pred.keys().zip(gt.keys()).any(|(a, b)| a != b) {
        let missing: Vec<_> = gt.keys().filter(|k| !pred.contains_key(k)).collect();
        let extra: Vec<_> = pred.keys().filter(|k| !gt.contains_key(k)).collect();
        return Err(Error::KeyMismatch(format!("missing {missing:?}, unexpected {extra:?}")));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (key, g) in gt {
        let p = &pred[key];
        if (p.width, p.height) != (g.width, g.height) {
            return Err(Error::ShapeMismatch(format!(
                "{key:?}: predicted {}x{}, ground truth {}x{}",
                p.width, p.height, g.width, g.height
            )));
        }
        for k in 0..g.vectors.len() {
            if g.valid[k] && p.valid[k] {
                sum += (p.vectors[k][0] - g.vectors[k][0]).abs() + (p.vectors[k][1] - g.vectors[k][1]).abs();
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// `exp(-lambda * loss)`.
pub fn self_paced_progress(loss: f64, lambda: f64) -> Result<f64> {
    if loss < 0.0 {
        return Err(Error::NegativeLoss(loss));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) || loss.is_nan() {
        return Err(Error::InvalidInput(format!("self-paced progress needs finite lambda >= 0, got {lambda}")));
    }
    Ok((-lambda * loss).exp())
}

/// All three weights set to `w0 + (w_final - w0) * phi`.
pub fn self_paced_weights(phi: f64, bounds: &WeightBounds) -> CurriculumWeights {
    CurriculumWeights::uniform(bounds.interpolate(phi.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::testing::{random_pose, random_rotation_vector, random_vector};
    use crate::geometry::RigidPose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_traj(rng: &mut ChaCha8Rng, n: usize) -> Trajectory {
        Trajectory::new("r", (0..n).map(|_| random_pose(rng)).collect()).unwrap()
    }

    #[test]
    fn hierarchical_examples() {
        let parts = LossParts {
            flow: 1.0,
            translation: 1.0,
            rotation: 1.0,
        };
        let s = BaseScales::default();
        let b = hierarchical_total_loss(&parts, &CurriculumWeights::UNIT, &s);
        assert!((b.total - 20.1).abs() < 1e-12);
        let w = CurriculumWeights {
            rotation: 0.0,
            ..CurriculumWeights::UNIT
        };
        assert!((hierarchical_total_loss(&parts, &w, &s).total - 10.1).abs() < 1e-12);
        let w = CurriculumWeights {
            flow: 0.0,
            pose: 0.0,
            rotation: 1.0,
        };
        assert_eq!(hierarchical_total_loss(&parts, &w, &s).total, 0.0);
    }

    #[test]
    fn baseline_examples() {
        let parts = LossParts {
            flow: 1.0,
            translation: 1.0,
            rotation: 0.0,
        };
        assert!((baseline_total_loss(&parts) - 10.1).abs() < 1e-12);
        assert_eq!(baseline_total_loss(&LossParts::default()), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let parts = LossParts {
                flow: rng.random_range(0.0..100.0),
                translation: rng.random_range(0.0..100.0),
                rotation: rng.random_range(0.0..100.0),
            };
            let h = hierarchical_total_loss(&parts, &CurriculumWeights::UNIT, &BaseScales::default());
            assert_eq!(h.total.to_bits(), baseline_total_loss(&parts).to_bits());
        }
    }

    #[test]
    fn pose_loss_zero_on_match_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gt = random_traj(&mut rng, 8);
        let l = pose_supervision_loss(&gt, &gt, false).unwrap();
        assert!(l.translation < 1e-9 && l.rotation < 1e-9 && l.joint < 1e-9);
        let l = pose_supervision_loss(&gt.scaled(2.0), &gt, true).unwrap();
        assert!(l.translation < 1e-9 && l.rotation < 1e-9, "{l:?}");
        assert!(pose_supervision_loss(&gt.scaled(2.0), &gt, false).unwrap().translation > 1.0);
    }

    #[test]
    fn pose_loss_matches_pairwise_oracle() {
        // oracle: homogeneous matrices and a matrix-log free route through
        // rotation angle and V^-1 computed from Rodrigues coefficients
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt: Vec<RigidPose> = (0..3).map(|_| random_pose(&mut rng)).collect();
        let mut pred = gt.clone();
        let bump = RigidPose::from_rotation_vector(random_rotation_vector(&mut rng, 0.5), random_vector(&mut rng, 0.3));
        pred[1] = pred[1].compose(&bump);
        let (gt_t, pred_t) = (
            Trajectory::new("g", gt.clone()).unwrap(),
            Trajectory::new("p", pred.clone()).unwrap(),
        );
        let got = pose_supervision_loss(&pred_t, &gt_t, false).unwrap();

        let mut want_t = 0.0;
        let mut want_r = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let gij = gt[i].to_matrix().try_inverse().unwrap() * gt[j].to_matrix();
                let tij = pred[i].to_matrix().try_inverse().unwrap() * pred[j].to_matrix();
                let e = gij.try_inverse().unwrap() * tij;
                let r = e.fixed_view::<3, 3>(0, 0).into_owned();
                let t = e.fixed_view::<3, 1>(0, 3).into_owned();
                let theta = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
                if theta < 1e-6 {
                    // untouched pair: E is the identity up to rounding
                    want_t += t.norm();
                    want_r += theta;
                    continue;
                }
                let w_hat = (r - r.transpose()) * (theta / (2.0 * theta.sin()));
                let w = nalgebra::Vector3::new(w_hat[(2, 1)], w_hat[(0, 2)], w_hat[(1, 0)]);
                let a = theta.sin() / theta;
                let b = (1.0 - theta.cos()) / (theta * theta);
                let v_inv = nalgebra::Matrix3::identity() - w_hat * 0.5
                    + w_hat * w_hat * ((1.0 - a / (2.0 * b)) / (theta * theta));
                want_t += (v_inv * t).norm();
                want_r += w.norm();
            }
        }
        assert!((got.translation - want_t).abs() < 1e-9, "{} vs {}", got.translation, want_t);
        assert!((got.rotation - want_r).abs() < 1e-9);
        assert!(got.joint <= got.translation + got.rotation + 1e-12);
    }

    #[test]
    fn pose_loss_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_traj(&mut rng, 4);
        let b = random_traj(&mut rng, 5);
        assert!(matches!(pose_supervision_loss(&a, &b, false), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn pose_loss_invariant_to_common_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let gt = random_traj(&mut rng, 6);
            let pred = Trajectory::new(
                "p",
                gt.poses()
                    .iter()
                    .map(|p| {
                        p.compose(&RigidPose::from_rotation_vector(
                            random_rotation_vector(&mut rng, 0.2),
                            random_vector(&mut rng, 0.2),
                        ))
                    })
                    .collect(),
            )
            .unwrap();
            let m = random_pose(&mut rng);
            let a = pose_supervision_loss(&pred, &gt, false).unwrap();
            let b = pose_supervision_loss(&pred.transformed(&m), &gt.transformed(&m), false).unwrap();
            assert!((a.translation - b.translation).abs() < 1e-9);
            assert!((a.rotation - b.rotation).abs() < 1e-9);
        }
    }

    fn field(vals: &[[f64; 2]]) -> FlowField {
        FlowField::new(2, vals.len() / 2, vals.to_vec(), vec![true; vals.len()]).unwrap()
    }

    #[test]
    fn flow_examples() {
        let mut gt = FlowSet::new();
        gt.insert(FlowKey::new(0, 1).unwrap(), field(&[[1.0, 2.0], [0.0, 0.5], [3.0, -1.0], [0.2, 0.2]]));
        gt.insert(FlowKey::new(2, -2).unwrap(), field(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]));
        assert_eq!(flow_supervision_loss(&gt, &gt).unwrap(), 0.0);

        let shifted: FlowSet = gt
            .iter()
            .map(|(k, f)| {
                let mut f = f.clone();
                f.vectors.iter_mut().for_each(|v| {
                    v[0] += 1.0;
                    v[1] += 1.0
                });
                (*k, f)
            })
            .collect();
        assert!((flow_supervision_loss(&shifted, &gt).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flow_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut gt = FlowSet::new();
        let mut pred = FlowSet::new();
        for frame in 0..3 {
            let key = FlowKey::new(frame, 1).unwrap();
            let g: Vec<[f64; 2]> = (0..4).map(|_| [rng.random(), rng.random()]).collect();
            let p: Vec<[f64; 2]> = (0..4).map(|_| [rng.random(), rng.random()]).collect();
            gt.insert(key, field(&g));
            pred.insert(key, field(&p));
        }
        let mut sum = 0.0;
        for (k, g) in &gt {
            for (a, b) in pred[k].vectors.iter().zip(&g.vectors) {
                sum += (a[0] - b[0]).abs() + (a[1] - b[1]).abs();
            }
        }
        assert!((flow_supervision_loss(&pred, &gt).unwrap() - sum / 12.0).abs() < 1e-12);
    }

    #[test]
    fn flow_errors_and_masks() {
        let mut gt = FlowSet::new();
        gt.insert(FlowKey::new(0, 1).unwrap(), field(&[[0.0, 0.0], [0.0, 0.0]]));
        let mut other = FlowSet::new();
        other.insert(FlowKey::new(0, 2).unwrap(), field(&[[0.0, 0.0], [0.0, 0.0]]));
        assert!(matches!(flow_supervision_loss(&other, &gt), Err(Error::KeyMismatch(_))));
        let mut wide = FlowSet::new();
        wide.insert(
            FlowKey::new(0, 1).unwrap(),
            FlowField::new(1, 2, vec![[0.0, 0.0]; 2], vec![true; 2]).unwrap(),
        );
        assert!(matches!(flow_supervision_loss(&wide, &gt), Err(Error::ShapeMismatch(_))));
        assert!(FlowKey::new(0, 3).is_err());

        let mut masked = gt.clone();
        let f = masked.get_mut(&FlowKey::new(0, 1).unwrap()).unwrap();
        f.vectors[1] = [5.0, 5.0];
        f.valid[1] = false;
        assert_eq!(flow_supervision_loss(&masked, &gt).unwrap(), 0.0);
    }

    #[test]
    fn self_paced_examples() {
        assert_eq!(self_paced_progress(0.0, 0.1).unwrap(), 1.0);
        assert!((self_paced_progress(10.0, 0.1).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(self_paced_progress(123.0, 0.0).unwrap(), 1.0);
        assert!(matches!(self_paced_progress(-1.0, 0.1), Err(Error::NegativeLoss(_))));

        let b = WeightBounds::default();
        assert_eq!(self_paced_weights(1.0, &b), CurriculumWeights::UNIT);
        assert_eq!(self_paced_weights(0.0, &b), CurriculumWeights::uniform(0.1));
        assert!((self_paced_weights(0.5, &b).flow - 0.55).abs() < 1e-15);
    }

    #[test]
    fn bounds_validation() {
        assert!(WeightBounds::new(1.0, 0.1).is_err());
        assert!(WeightBounds::new(0.1, 1.0).is_ok());
    }
}
