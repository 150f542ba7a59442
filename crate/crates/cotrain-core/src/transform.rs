//! Rigid transforms and the pinhole projection model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quat;

/// A rotation (unit quaternion) followed by a translation, mapping points
/// from one frame into another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Quat,
    translation: [f64; 3],
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: Quat::IDENTITY,
        translation: [0.0; 3],
    };

    pub fn new(rotation: Quat, translation: [f64; 3]) -> Result<RigidTransform> {
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("translation must be finite".into()));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn rotation(&self) -> &Quat {
        &self.rotation
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation.rotate(p);
        [
            r[0] + self.translation[0],
            r[1] + self.translation[1],
            r[2] + self.translation[2],
        ]
    }

    /// `self.compose(other)` applies `other` first: the result maps `x` to
    /// `self.apply(other.apply(x))`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let rotation = self.rotation * other.rotation;
        let translation = self.apply(other.translation);
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv_rot = self.rotation.inverse();
        let t = inv_rot.rotate(self.translation);
        RigidTransform {
            rotation: inv_rot,
            translation: [-t[0], -t[1], -t[2]],
        }
    }
}

/// JSON wire form of a rigid transform:
/// `{"quaternion":[w,x,y,z],"translation":[x,y,z]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidTransformWire {
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for RigidTransformWire {
    fn from(t: &RigidTransform) -> Self {
        RigidTransformWire {
            quaternion: t.rotation.wxyz(),
            translation: t.translation,
        }
    }
}

impl TryFrom<RigidTransformWire> for RigidTransform {
    type Error = Error;

    fn try_from(wire: RigidTransformWire) -> Result<RigidTransform> {
        RigidTransform::new(Quat::from_wxyz(wire.quaternion)?, wire.translation)
    }
}

/// Pinhole camera intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl PinholeCamera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<PinholeCamera> {
        if !(fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidInput("intrinsics must be finite".into()));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidInput("focal lengths must be positive".into()));
        }
        Ok(PinholeCamera { fx, fy, cx, cy })
    }

    /// Projects a camera-frame point to pixels; the point must have
    /// strictly positive depth.
    pub fn project(&self, p: [f64; 3]) -> Result<[f64; 2]> {
        if p[2] <= 1e-12 {
            return Err(Error::BehindCamera(format!("depth {}", p[2])));
        }
        Ok([
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        ])
    }
}
