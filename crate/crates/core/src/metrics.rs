//! Trajectory evaluation: Umeyama similarity alignment, ATE and AUC.
//!
//! Alignment is a point-cloud fit on translations only; rotations never
//! enter the fit. ATE is the RMSE of per-pose translation residuals.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::geometry::RigidPose;
use crate::parallel::Execution;
use crate::trajectory::Trajectory;

/// `x -> scale * R x + t`, mapping estimate coordinates onto ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    pub fn unapply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation) / self.scale
    }

    /// Moves a whole pose; the timestamp is kept.
    pub fn apply_pose(&self, pose: &RigidPose) -> RigidPose {
        RigidPose::new(self.rotation * pose.rotation(), self.apply(pose.translation()))
            .with_timestamp(pose.timestamp())
    }

    pub fn apply_trajectory(&self, traj: &Trajectory) -> Trajectory {
        let poses = traj.poses().iter().map(|p| self.apply_pose(p)).collect();
        Trajectory::new(traj.sequence_id(), poses).expect("timestamps unchanged")
    }
}

fn check_lengths(est: &Trajectory, gt: &Trajectory, min: usize) -> Result<()> {
    if est.len() != gt.len() {
        return Err(Error::LengthMismatch {
            est: est.len(),
            gt: gt.len(),
        });
    }
    est.require_len(min)
}

/// Closed-form least-squares similarity from `est` translations to `gt` translations.
pub fn umeyama_align(est: &Trajectory, gt: &Trajectory) -> Result<SimilarityTransform> {
    check_lengths(est, gt, 3)?;
    let xs = est.positions();
    let ys = gt.positions();
    let n = xs.len() as f64;
    let mu_x = xs.iter().sum::<Vector3<f64>>() / n;
    let mu_y = ys.iter().sum::<Vector3<f64>>() / n;

    let var_x = xs.iter().map(|x| (x - mu_x).norm_squared()).sum::<f64>() / n;
    let var_y = ys.iter().map(|y| (y - mu_y).norm_squared()).sum::<f64>() / n;
    let scale_ref = xs.iter().chain(&ys).map(|p| p.norm_squared()).fold(1.0, f64::max);
    if var_x <= 1e-24 * scale_ref {
        return Err(Error::DegenerateGeometry("estimate translations have zero variance".into()));
    }
    if var_y <= 1e-24 * scale_ref {
        return Err(Error::DegenerateGeometry("ground-truth translations are coincident".into()));
    }

    let mut cov = Matrix3::zeros();
    for (x, y) in xs.iter().zip(&ys) {
        cov += (y - mu_y) * (x - mu_x).transpose();
    }
    cov /= n;

    let svd = cov.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let d = svd.singular_values;

    let mut s = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        // reflection: flip the weakest singular direction
        let weakest = d.imin();
        s[weakest] = -1.0;
    }
    let rot = u * Matrix3::from_diagonal(&s) * v_t;
    let scale = d.dot(&s) / var_x;
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::DegenerateGeometry(format!("alignment scale {scale} is not positive")));
    }
    let rotation = UnitQuaternion::from_matrix(&rot);
    let translation = mu_y - rotation * mu_x * scale;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

fn rmse(est: &[Vector3<f64>], gt: &[Vector3<f64>]) -> f64 {
    let sum: f64 = est.iter().zip(gt).map(|(a, b)| (a - b).norm_squared()).sum();
    (sum / est.len() as f64).sqrt()
}

/// Translation RMSE after mapping `est` through `sim`.
pub fn aligned_rmse(est: &Trajectory, gt: &Trajectory, sim: &SimilarityTransform) -> Result<f64> {
    check_lengths(est, gt, 1)?;
    let moved: Vec<_> = est.positions().iter().map(|p| sim.apply(p)).collect();
    Ok(rmse(&moved, &gt.positions()))
}

/// Absolute trajectory error in meters (RMSE), optionally after Umeyama alignment.
pub fn ate(est: &Trajectory, gt: &Trajectory, align: bool) -> Result<f64> {
    if align {
        let sim = umeyama_align(est, gt)?;
        aligned_rmse(est, gt, &sim)
    } else {
        check_lengths(est, gt, 2)?;
        Ok(rmse(&est.positions(), &gt.positions()))
    }
}

/// ATE over many (estimate, ground truth) pairs; output order follows input order.
pub fn ate_batch(pairs: &[(Trajectory, Trajectory)], align: bool, exec: Execution) -> Vec<Result<f64>> {
    exec.map(pairs, |(est, gt)| ate(est, gt, align))
}

/// Normalized area under the success-rate curve `s(t) = #{e <= t} / n` over `[0, t_max]`.
///
/// Integrating the step function exactly gives `mean(max(0, t_max - e)) / t_max`.
pub fn auc(errors: &[f64], t_max: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("no errors to integrate".into()));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidInput(format!("t_max must be positive, got {t_max}")));
    }
    if let Some(bad) = errors.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::InvalidInput(format!("error values must be finite and >= 0, got {bad}")));
    }
    let area: f64 = errors.iter().map(|e| (t_max - e).max(0.0)).sum();
    Ok((area / (errors.len() as f64 * t_max)).clamp(0.0, 1.0))
}

/// Samples of the success-rate curve at `points` evenly spaced thresholds in `[0, t_max]`.
pub fn success_curve(errors: &[f64], t_max: f64, points: usize) -> Vec<(f64, f64)> {
    let n = errors.len().max(1) as f64;
    (0..points)
        .map(|k| {
            let t = t_max * k as f64 / (points.max(2) - 1) as f64;
            let hits = errors.iter().filter(|e| **e <= t).count() as f64;
            (t, hits / n)
        })
        .collect()
}
