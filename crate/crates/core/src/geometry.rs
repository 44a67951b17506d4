//! SE(3) and SO(3) primitives.
//!
//! Rotations are unit quaternions stored with a non-negative scalar part so
//! that every rotation has exactly one representation. Timestamps ride along
//! on poses but group operations ignore them and return untimed poses.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3, Vector6};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Below this rotation angle exp/log switch to Taylor series.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Margin from pi inside which the SE(3) log refuses to answer.
pub const NEAR_PI_MARGIN: f64 = 1e-6;

/// A rigid-body transform: unit quaternion rotation plus translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
    timestamp: Option<f64>,
}

/// Tangent vector of SE(3): rotational part `omega` (rad), translational part `v` (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Twist {
    pub fn new(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { omega, v }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    /// `[omega, v]` stacked.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.omega.x, self.omega.y, self.omega.z, self.v.x, self.v.y, self.v.z,
        )
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

fn canonical(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    let q = if q.w < 0.0 { -q } else { q };
    UnitQuaternion::new_normalize(q)
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            timestamp: None,
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: canonical(rotation.into_inner()),
            translation,
            timestamp: None,
        }
    }

    /// Builds a pose from raw quaternion components, normalizing them.
    /// Returns `None` for a zero or non-finite quaternion.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64, translation: Vector3<f64>) -> Option<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        Some(Self {
            rotation: canonical(q),
            translation,
            timestamp: None,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation_vector(omega: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(so3_exp(&omega), translation)
    }

    pub fn with_timestamp(mut self, timestamp: Option<f64>) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn timestamp(&self) -> Option<f64> {
        self.timestamp
    }

    /// Quaternion as `[w, x, y, z]`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Homogeneous 4x4 matrix.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: canonical((self.rotation * other.rotation).into_inner()),
            translation: self.rotation * other.translation + self.translation,
            timestamp: None,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let inv = self.rotation.inverse();
        RigidPose {
            rotation: canonical(inv.into_inner()),
            translation: -(inv * self.translation),
            timestamp: None,
        }
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let q = self.rotation.quaternion();
        2.0 * q.imag().norm().atan2(q.w)
    }

    /// Largest deviation between the two poses, comparing quaternion
    /// components (canonical form) and translation components.
    pub fn max_abs_diff(&self, other: &RigidPose) -> f64 {
        let a = self.quaternion_wxyz();
        let b = other.quaternion_wxyz();
        let dq = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        dq.max((self.translation - other.translation).amax())
    }
}

/// Group product `a * b`.
pub fn compose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.compose(b)
}

pub fn inverse(a: &RigidPose) -> RigidPose {
    a.inverse()
}

/// `a^-1 * b`: the pose of `b` expressed in the frame of `a`.
pub fn relative_pose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.inverse().compose(b)
}

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation vector to unit quaternion.
pub fn so3_exp(omega: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = omega.norm();
    let q = if theta < SMALL_ANGLE {
        let theta2 = theta * theta;
        Quaternion::from_parts(1.0 - theta2 / 8.0, omega * (0.5 - theta2 / 48.0))
    } else {
        let half = 0.5 * theta;
        Quaternion::from_parts(half.cos(), omega * (half.sin() / theta))
    };
    canonical(q)
}

/// Unit quaternion to rotation vector, angle in `[0, pi]`.
pub fn so3_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = q.quaternion();
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let n = v.norm();
    if n < SMALL_ANGLE {
        // atan(n/w)/n ~ (1/w)(1 - n^2/(3 w^2))
        v * (2.0 / w) * (1.0 - n * n / (3.0 * w * w))
    } else {
        let theta = 2.0 * n.atan2(w);
        v * (theta / n)
    }
}

/// Left Jacobian of SO(3) (the `V` matrix of the SE(3) exponential).
fn left_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let w = hat(omega);
    let (b, c) = if theta < SMALL_ANGLE {
        (0.5 - theta * theta / 24.0, 1.0 / 6.0 - theta * theta / 120.0)
    } else {
        let s = (0.5 * theta).sin();
        (
            2.0 * s * s / (theta * theta),
            (theta - theta.sin()) / (theta * theta * theta),
        )
    };
    Matrix3::identity() + w * b + w * w * c
}

fn left_jacobian_inverse(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let w = hat(omega);
    let d = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half * half.cos() / half.sin()) / (theta * theta)
    };
    Matrix3::identity() - w * 0.5 + w * w * d
}

pub fn se3_exp(xi: &Twist) -> RigidPose {
    RigidPose::new(so3_exp(&xi.omega), left_jacobian(&xi.omega) * xi.v)
}

/// SE(3) logarithm on the principal branch.
pub fn se3_log(pose: &RigidPose) -> Result<Twist> {
    let angle = pose.angle();
    if PI - angle < NEAR_PI_MARGIN {
        return Err(Error::AngleNearPi {
            angle,
            margin: NEAR_PI_MARGIN,
        });
    }
    let omega = so3_log(&pose.rotation);
    let v = left_jacobian_inverse(&omega) * pose.translation;
    Ok(Twist { omega, v })
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::Rng;

    pub fn random_rotation_vector<R: Rng>(rng: &mut R, max_angle: f64) -> Vector3<f64> {
        let axis = loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break v / n;
            }
        };
        axis * rng.random_range(0.0..max_angle)
    }

    pub fn random_vector<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    pub fn random_pose<R: Rng>(rng: &mut R) -> RigidPose {
        RigidPose::from_rotation_vector(random_rotation_vector(rng, PI - 1e-3), random_vector(rng, 5.0))
    }

    /// Truncated power series of the 4x4 twist matrix.
    pub fn matrix_exp_oracle(xi: &Twist) -> Matrix4<f64> {
        let mut a = Matrix4::zeros();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&xi.omega));
        a.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.v);
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for k in 1..80 {
            term = term * a / k as f64;
            sum += term;
        }
        sum
    }
}
