//! Trajectory data model: frames, trajectories, feature sequences, and the
//! sample-rate pair used to reconcile human and robot demonstration speeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quat;

/// Which embodiment produced a demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Human,
    Robot,
}

/// One timestep of end-effector state: translation in meters, orientation as
/// a unit quaternion, and a hand-joint vector in radians (possibly empty).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionFrame {
    translation: [f64; 3],
    orientation: Quat,
    joints: Vec<f64>,
}

impl ActionFrame {
    pub fn new(translation: [f64; 3], orientation: Quat, joints: Vec<f64>) -> Result<ActionFrame> {
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("translation must be finite".into()));
        }
        if joints.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("joint values must be finite".into()));
        }
        Ok(ActionFrame {
            translation,
            orientation,
            joints,
        })
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    pub fn orientation(&self) -> &Quat {
        &self.orientation
    }

    pub fn joints(&self) -> &[f64] {
        &self.joints
    }

    pub fn joint_dim(&self) -> usize {
        self.joints.len()
    }

    /// Flat layout `[tx, ty, tz, qw, qx, qy, qz, j0, ..]`, the per-step
    /// action/proprioception vector used by batching and file formats.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(7 + self.joints.len());
        out.extend_from_slice(&self.translation);
        out.extend_from_slice(&self.orientation.wxyz());
        out.extend_from_slice(&self.joints);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<ActionFrame> {
        if flat.len() < 7 {
            return Err(Error::DimensionMismatch(format!(
                "flat frame needs at least 7 values, got {}",
                flat.len()
            )));
        }
        let orientation = Quat::new(flat[3], flat[4], flat[5], flat[6])?;
        ActionFrame::new([flat[0], flat[1], flat[2]], orientation, flat[7..].to_vec())
    }

    pub const fn flat_dim(joint_dim: usize) -> usize {
        7 + joint_dim
    }
}

/// A uniformly sampled sequence of frames with timestep `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frames: Vec<ActionFrame>,
    dt: f64,
    source: Source,
    demo_id: String,
}

impl Trajectory {
    pub fn new(
        frames: Vec<ActionFrame>,
        dt: f64,
        source: Source,
        demo_id: impl Into<String>,
    ) -> Result<Trajectory> {
        if frames.is_empty() {
            return Err(Error::InvalidInput(
                "trajectory needs at least one frame".into(),
            ));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "dt must be finite and positive, got {dt}"
            )));
        }
        let joint_dim = frames[0].joint_dim();
        if frames.iter().any(|f| f.joint_dim() != joint_dim) {
            return Err(Error::DimensionMismatch(
                "all frames in a trajectory must share the same joint dimension".into(),
            ));
        }
        Ok(Trajectory {
            frames,
            dt,
            source,
            demo_id: demo_id.into(),
        })
    }

    pub fn frames(&self) -> &[ActionFrame] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &ActionFrame {
        &self.frames[t]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 1 by construction
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn demo_id(&self) -> &str {
        &self.demo_id
    }

    pub fn joint_dim(&self) -> usize {
        self.frames[0].joint_dim()
    }

    /// Time from the first to the last sample.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }
}

/// Per-frame feature vectors (e.g. embeddings of video frames) attached to a
/// demonstration. Values are kept as f64 in memory; the binary file format
/// stores them as f32.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    rows: Vec<Vec<f64>>,
    demo_id: String,
}

impl FeatureSequence {
    pub fn new(rows: Vec<Vec<f64>>, demo_id: impl Into<String>) -> Result<FeatureSequence> {
        if rows.is_empty() {
            return Err(Error::InvalidInput(
                "feature sequence needs at least one row".into(),
            ));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput(
                "feature dimension must be at least 1".into(),
            ));
        }
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(
                    "all feature rows must share the same dimension".into(),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("feature values must be finite".into()));
            }
        }
        Ok(FeatureSequence {
            rows,
            demo_id: demo_id.into(),
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn demo_id(&self) -> &str {
        &self.demo_id
    }
}

/// Sample-rate pair: `gamma` is the robot/human duration ratio, `k` the
/// action horizon. The robot may be faster than the human, so `gamma < 1`
/// is allowed; what must hold is that a horizon scaled by `gamma` still
/// contains at least one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRate {
    gamma: f64,
    k: usize,
}

impl SampleRate {
    pub fn new(gamma: f64, k: usize) -> Result<SampleRate> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gamma must be finite and positive, got {gamma}"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidInput("action horizon k must be >= 1".into()));
        }
        if (gamma * k as f64).round() < 1.0 {
            return Err(Error::InvalidInput(format!(
                "round(gamma*k) must be >= 1, got gamma={gamma} k={k}"
            )));
        }
        Ok(SampleRate { gamma, k })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k(&self) -> usize {
        self.k
    }
}
