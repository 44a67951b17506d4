//! Forward-mode dual numbers and an SE(3) kernel generic over the scalar.
//!
//! Poses are unit quaternions `[w, x, y, z]` plus a translation. The kernel
//! mirrors the f64 geometry module, with series branches chosen so that
//! derivatives stay finite at zero rotation.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(x: f64) -> Self;
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan2(self, x: Self) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Real for f64 {
    fn cst(x: f64) -> Self {
        x
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// `re + sum_k du[k] eps_k` with `eps_j eps_k = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub du: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(re: f64) -> Self {
        Self { re, du: [0.0; N] }
    }

    /// Seeds the `k`-th infinitesimal.
    pub fn variable(re: f64, k: usize) -> Self {
        let mut du = [0.0; N];
        du[k] = 1.0;
        Self { re, du }
    }

    fn chain(self, re: f64, d: f64) -> Self {
        let mut du = self.du;
        for v in &mut du {
            *v *= d;
        }
        Self { re, du }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.re += o.re;
        for k in 0..N {
            self.du[k] += o.du[k];
        }
        self
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self.re -= o.re;
        for k in 0..N {
            self.du[k] -= o.du[k];
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut du = [0.0; N];
        for k in 0..N {
            du[k] = self.du[k] * o.re + self.re * o.du[k];
        }
        Self { re: self.re * o.re, du }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        let re = self.re * inv;
        let mut du = [0.0; N];
        for k in 0..N {
            du[k] = (self.du[k] - re * o.du[k]) * inv;
        }
        Self { re, du }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.chain(-self.re, -1.0)
    }
}

impl<const N: usize> Real for Dual<N> {
    fn cst(x: f64) -> Self {
        Self::constant(x)
    }
    fn re(&self) -> f64 {
        self.re
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, 0.5 / r)
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn atan2(self, x: Self) -> Self {
        let d = self.re * self.re + x.re * x.re;
        let mut du = [0.0; N];
        for k in 0..N {
            du[k] = (x.re * self.du[k] - self.re * x.du[k]) / d;
        }
        Self {
            re: self.re.atan2(x.re),
            du,
        }
    }
    fn scale(self, k: f64) -> Self {
        self.chain(self.re * k, k)
    }
}

pub type V3<T> = [T; 3];

pub fn dot<T: Real>(a: &V3<T>, b: &V3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<T: Real>(a: &V3<T>, b: &V3<T>) -> V3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Euclidean norm with a zero derivative at the origin.
pub fn norm<T: Real>(a: &V3<T>) -> T {
    let n2 = dot(a, a);
    if n2.re() == 0.0 {
        T::cst(0.0)
    } else {
        n2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    /// `[w, x, y, z]`.
    pub q: [T; 4],
    pub t: V3<T>,
}

fn quat_mul<T: Real>(a: &[T; 4], b: &[T; 4]) -> [T; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// `q v q*` for a unit quaternion.
pub fn rotate<T: Real>(q: &[T; 4], v: &V3<T>) -> V3<T> {
    let u = [q[1], q[2], q[3]];
    let c = cross(&u, v);
    let two = T::cst(2.0);
    let tvec = [c[0] * two, c[1] * two, c[2] * two];
    let c2 = cross(&u, &tvec);
    [
        v[0] + q[0] * tvec[0] + c2[0],
        v[1] + q[0] * tvec[1] + c2[1],
        v[2] + q[0] * tvec[2] + c2[2],
    ]
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        let z = T::cst(0.0);
        Self {
            q: [T::cst(1.0), z, z, z],
            t: [z, z, z],
        }
    }

    /// Rotation `exp(omega)` with translation `t`.
    pub fn from_step(omega: &V3<T>, t: &V3<T>) -> Self {
        let th2 = dot(omega, omega);
        let (c, s) = if th2.re() < 1e-8 {
            let th4 = th2 * th2;
            (
                T::cst(1.0) - th2.scale(1.0 / 8.0) + th4.scale(1.0 / 384.0),
                T::cst(0.5) - th2.scale(1.0 / 48.0) + th4.scale(1.0 / 3840.0),
            )
        } else {
            let th = th2.sqrt();
            let half = th.scale(0.5);
            (half.cos(), half.sin() / th)
        };
        Self {
            q: [c, omega[0] * s, omega[1] * s, omega[2] * s],
            t: *t,
        }
    }

    pub fn compose(&self, o: &Pose<T>) -> Pose<T> {
        let r = rotate(&self.q, &o.t);
        Pose {
            q: quat_mul(&self.q, &o.q),
            t: [self.t[0] + r[0], self.t[1] + r[1], self.t[2] + r[2]],
        }
    }

    pub fn inverse(&self) -> Pose<T> {
        let qc = [self.q[0], -self.q[1], -self.q[2], -self.q[3]];
        let r = rotate(&qc, &self.t);
        Pose {
            q: qc,
            t: [-r[0], -r[1], -r[2]],
        }
    }

    /// `self^-1 * o`.
    pub fn between(&self, o: &Pose<T>) -> Pose<T> {
        self.inverse().compose(o)
    }

    /// Rotation vector of the canonical (`w >= 0`) quaternion.
    pub fn rotation_log(&self) -> V3<T> {
        let mut q = self.q;
        if q[0].re() < 0.0 {
            q = [-q[0], -q[1], -q[2], -q[3]];
        }
        let n2 = q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
        let f = if n2.re() < 1e-8 {
            let r2 = n2 / (q[0] * q[0]);
            (T::cst(1.0) - r2.scale(1.0 / 3.0) + (r2 * r2).scale(0.2)).scale(2.0) / q[0]
        } else {
            let n = n2.sqrt();
            n.atan2(q[0]).scale(2.0) / n
        };
        [q[1] * f, q[2] * f, q[3] * f]
    }

    /// Twist `(omega, v)` with `exp(omega, v) = self`.
    pub fn log(&self) -> (V3<T>, V3<T>) {
        let w = self.rotation_log();
        let th2 = dot(&w, &w);
        let d = if th2.re() < 1e-4 {
            T::cst(1.0 / 12.0) + th2.scale(1.0 / 720.0) + (th2 * th2).scale(1.0 / 30240.0)
        } else {
            let half = th2.sqrt().scale(0.5);
            (T::cst(1.0) - half * half.cos() / half.sin()) / th2
        };
        let wt = cross(&w, &self.t);
        let wwt = cross(&w, &wt);
        let v = [
            self.t[0] - wt[0].scale(0.5) + d * wwt[0],
            self.t[1] - wt[1].scale(0.5) + d * wwt[1],
            self.t[2] - wt[2].scale(0.5) + d * wwt[2],
        ];
        (w, v)
    }
}

impl Pose<f64> {
    pub fn lift<const N: usize>(&self) -> Pose<Dual<N>> {
        Pose {
            q: self.q.map(Dual::constant),
            t: self.t.map(Dual::constant),
        }
    }

    pub fn to_rigid(&self) -> crate::geometry::RigidPose {
        crate::geometry::RigidPose::from_wxyz(
            self.q[0],
            self.q[1],
            self.q[2],
            self.q[3],
            nalgebra::Vector3::new(self.t[0], self.t[1], self.t[2]),
        )
        .expect("unit quaternion")
    }

    pub fn from_rigid(p: &crate::geometry::RigidPose) -> Self {
        Self {
            q: p.quaternion_wxyz(),
            t: [p.translation().x, p.translation().y, p.translation().z],
        }
    }
}
