//! Unit quaternion algebra.
//!
//! Convention: components are stored `[w, x, y, z]` (scalar first),
//! right-handed, representing active rotations. Construction normalizes, so
//! every `Quat` in circulation is unit norm within 1e-9.

use std::ops::Mul;

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a unit quaternion from raw components, normalizing on ingest.
    ///
    /// Fails with `InvalidInput` if any component is non-finite or the norm
    /// is too close to zero to normalize.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Quat> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::InvalidInput(
                "quaternion components must be finite".into(),
            ));
        }
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidInput(
                "quaternion norm too small to normalize".into(),
            ));
        }
        Ok(Quat {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn from_wxyz(q: [f64; 4]) -> Result<Quat> {
        Quat::new(q[0], q[1], q[2], q[3])
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Quat> {
        if !angle.is_finite() {
            return Err(Error::InvalidInput("angle must be finite".into()));
        }
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidInput("axis must be a non-zero vector".into()));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Quat::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOL
    }

    pub fn dot(&self, other: &Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(&self) -> Quat {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Inverse rotation; equal to the conjugate for unit quaternions.
    pub fn inverse(&self) -> Quat {
        self.conjugate()
    }

    fn neg(&self) -> Quat {
        Quat {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Rotates a 3-vector by this quaternion.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        // q * (0, v) * q^-1 expanded to avoid intermediate quaternions.
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let tx = 2.0 * (y * v[2] - z * v[1]);
        let ty = 2.0 * (z * v[0] - x * v[2]);
        let tz = 2.0 * (x * v[1] - y * v[0]);
        [
            v[0] + w * tx + (y * tz - z * ty),
            v[1] + w * ty + (z * tx - x * tz),
            v[2] + w * tz + (x * ty - y * tx),
        ]
    }

    /// Spherical linear interpolation along the shorter arc.
    ///
    /// `t = 0` returns `self` exactly, `t = 1` returns `other` (up to sign,
    /// which is irrelevant for the rotation represented).
    pub fn slerp(&self, other: &Quat, t: f64) -> Quat {
        if t == 0.0 {
            return *self;
        }
        let mut b = *other;
        let mut cos_half = self.dot(other);
        if cos_half < 0.0 {
            b = b.neg();
            cos_half = -cos_half;
        }
        if t == 1.0 {
            return b;
        }
        if cos_half > 1.0 - 1e-12 {
            // Nearly identical rotations: normalized lerp is exact enough and
            // avoids dividing by sin of a vanishing angle.
            return Quat::new(
                self.w + t * (b.w - self.w),
                self.x + t * (b.x - self.x),
                self.y + t * (b.y - self.y),
                self.z + t * (b.z - self.z),
            )
            .unwrap_or(*self);
        }
        let half = cos_half.clamp(-1.0, 1.0).acos();
        let sin_half = half.sin();
        let wa = ((1.0 - t) * half).sin() / sin_half;
        let wb = (t * half).sin() / sin_half;
        Quat {
            w: wa * self.w + wb * b.w,
            x: wa * self.x + wb * b.x,
            y: wa * self.y + wb * b.y,
            z: wa * self.z + wb * b.z,
        }
    }

    /// Weighted chordal mean: sign-aligns every quaternion to the first,
    /// averages componentwise with the given weights, then renormalizes.
    /// Adequate for small angular spreads (ensembling overlapping
    /// predictions, not arbitrary rotation sets).
    pub fn weighted_chordal_mean(quats: &[(Quat, f64)]) -> Result<Quat> {
        if quats.is_empty() {
            return Err(Error::InvalidInput(
                "cannot average an empty set of quaternions".into(),
            ));
        }
        let reference = quats[0].0;
        let mut acc = [0.0f64; 4];
        for (q, weight) in quats {
            if !weight.is_finite() || *weight < 0.0 {
                return Err(Error::InvalidInput(
                    "quaternion weights must be finite and non-negative".into(),
                ));
            }
            let aligned = if reference.dot(q) < 0.0 { q.neg() } else { *q };
            acc[0] += weight * aligned.w;
            acc[1] += weight * aligned.x;
            acc[2] += weight * aligned.y;
            acc[3] += weight * aligned.z;
        }
        Quat::new(acc[0], acc[1], acc[2], acc[3])
    }
}

impl Mul for Quat {
    type Output = Quat;

    /// Hamilton product; composition `a * b` applies `b` first, then `a`.
    fn mul(self, rhs: Quat) -> Quat {
        Quat {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        }
    }
}

/// Geodesic distance between two rotations in radians, in `[0, pi]`.
///
/// Invariant to the sign of either quaternion (double cover).
pub fn rot_distance(a: &Quat, b: &Quat) -> f64 {
    2.0 * a.dot(b).abs().clamp(0.0, 1.0).acos()
}
