//! Kinematic retargeting: maps keypoint targets onto joint angles of a
//! declarative serial chain through box-constrained nonlinear least squares.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quat;
use crate::smooth::low_pass;
use crate::solver::{minimize, SolveError, SolveOptions};
use crate::traj::{ActionFrame, Source, Trajectory};

/// One revolute joint: rotation about `axis`, then a link of `length`
/// meters along the local x direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub axis: [f64; 3],
    pub length: f64,
}

/// A serial chain with joint limits. Keypoint `i` is the position reached
/// after link `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    links: Vec<Link>,
    q_lower: Vec<f64>,
    q_upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChainWire {
    links: Vec<Link>,
    q_lower: Vec<f64>,
    q_upper: Vec<f64>,
}

impl KinematicChain {
    pub fn new(links: Vec<Link>, q_lower: Vec<f64>, q_upper: Vec<f64>) -> Result<KinematicChain> {
        if links.is_empty() {
            return Err(Error::InvalidInput("chain needs at least one link".into()));
        }
        if q_lower.len() != links.len() || q_upper.len() != links.len() {
            return Err(Error::DimensionMismatch(format!(
                "bounds must match link count {}",
                links.len()
            )));
        }
        let mut normalized = Vec::with_capacity(links.len());
        for link in links {
            if !link.length.is_finite() || link.length <= 0.0 {
                return Err(Error::InvalidInput("link lengths must be positive".into()));
            }
            let n = (link.axis[0].powi(2) + link.axis[1].powi(2) + link.axis[2].powi(2)).sqrt();
            if !n.is_finite() || n < 1e-12 {
                return Err(Error::InvalidInput("link axis must be non-zero".into()));
            }
            normalized.push(Link {
                axis: [link.axis[0] / n, link.axis[1] / n, link.axis[2] / n],
                length: link.length,
            });
        }
        for (lo, hi) in q_lower.iter().zip(&q_upper) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidInput(
                    "joint bounds must be finite with lower <= upper".into(),
                ));
            }
        }
        Ok(KinematicChain {
            links: normalized,
            q_lower,
            q_upper,
        })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joint_count(&self) -> usize {
        self.links.len()
    }

    pub fn q_lower(&self) -> &[f64] {
        &self.q_lower
    }

    pub fn q_upper(&self) -> &[f64] {
        &self.q_upper
    }

    pub fn mid_range(&self) -> Vec<f64> {
        self.q_lower
            .iter()
            .zip(&self.q_upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn clamp(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(self.q_lower.iter().zip(&self.q_upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ChainWire {
            links: self.links.clone(),
            q_lower: self.q_lower.clone(),
            q_upper: self.q_upper.clone(),
        })
        .expect("chain serializes")
    }

    pub fn from_json(json: &str) -> Result<KinematicChain> {
        let wire: ChainWire =
            serde_json::from_str(json).map_err(|e| Error::Format(format!("chain json: {e}")))?;
        KinematicChain::new(wire.links, wire.q_lower, wire.q_upper)
    }

    /// Keypoints without bound clamping; the solver needs the objective to
    /// stay smooth slightly outside the box.
    fn keypoints_unclamped(&self, q: &[f64]) -> Vec<[f64; 3]> {
        let mut rot = Quat::IDENTITY;
        let mut pos = [0.0f64; 3];
        let mut out = Vec::with_capacity(self.links.len());
        for (link, angle) in self.links.iter().zip(q) {
            let joint = Quat::from_axis_angle(link.axis, *angle).expect("unit axis");
            rot = rot * joint;
            let step = rot.rotate([link.length, 0.0, 0.0]);
            pos = [pos[0] + step[0], pos[1] + step[1], pos[2] + step[2]];
            out.push(pos);
        }
        out
    }

    /// Per-link direction vectors `keypoint_i - keypoint_{i-1}` (the first
    /// is measured from the base).
    fn link_vectors_unclamped(&self, q: &[f64]) -> Vec<[f64; 3]> {
        let kps = self.keypoints_unclamped(q);
        let mut prev = [0.0f64; 3];
        kps.into_iter()
            .map(|kp| {
                let v = [kp[0] - prev[0], kp[1] - prev[1], kp[2] - prev[2]];
                prev = kp;
                v
            })
            .collect()
    }
}

/// Serial-chain forward kinematics. Joint values outside the bounds are
/// clamped with a warning.
pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<Vec<[f64; 3]>> {
    if q.len() != chain.joint_count() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} joint values, got {}",
            chain.joint_count(),
            q.len()
        )));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("joint values must be finite".into()));
    }
    let clamped = chain.clamp(q);
    if clamped != q {
        log::warn!("joint vector outside bounds, clamping");
    }
    Ok(chain.keypoints_unclamped(&clamped))
}

/// Solver parameters shared by both retargeting variants. `scale`
/// multiplies the targets, `smooth` weighs the squared deviation from the
/// previous joint vector. `keypoint_weights` optionally reweights the per
/// keypoint data terms (uniform when absent). `keypoint_smoothing` is the
/// low-pass factor applied to keypoint trajectories before per-frame
/// solves.
#[derive(Debug, Clone, PartialEq)]
pub struct RetargetConfig {
    pub scale: f64,
    pub smooth: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub keypoint_weights: Option<Vec<f64>>,
    pub keypoint_smoothing: f64,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        RetargetConfig {
            scale: 1.0,
            smooth: 0.1,
            max_iters: 100,
            tol: 1e-10,
            keypoint_weights: None,
            keypoint_smoothing: 0.2,
        }
    }
}

impl RetargetConfig {
    fn validate(&self, chain: &KinematicChain) -> Result<()> {
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(Error::InvalidInput("scale must be positive".into()));
        }
        if !self.smooth.is_finite() || self.smooth < 0.0 {
            return Err(Error::InvalidInput("smooth must be non-negative".into()));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidInput("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.keypoint_smoothing) || self.keypoint_smoothing == 0.0 {
            return Err(Error::InvalidInput(
                "keypoint_smoothing must lie in (0, 1]".into(),
            ));
        }
        if let Some(w) = &self.keypoint_weights {
            if w.len() != chain.joint_count() {
                return Err(Error::DimensionMismatch(
                    "keypoint_weights length must equal the link count".into(),
                ));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(
                    "keypoint_weights must be finite and non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    fn weight(&self, i: usize) -> f64 {
        self.keypoint_weights.as_ref().map_or(1.0, |w| w[i])
    }
}

fn validate_targets(chain: &KinematicChain, targets: &[[f64; 3]], q_prev: &[f64]) -> Result<()> {
    if targets.len() != chain.joint_count() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} targets, got {}",
            chain.joint_count(),
            targets.len()
        )));
    }
    if targets.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("targets must be finite".into()));
    }
    if q_prev.len() != chain.joint_count() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} previous joints, got {}",
            chain.joint_count(),
            q_prev.len()
        )));
    }
    if q_prev.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("q_prev must be finite".into()));
    }
    Ok(())
}

fn solve_retarget(
    chain: &KinematicChain,
    q_prev: &[f64],
    cfg: &RetargetConfig,
    data_residual: impl Fn(&[f64], &mut Vec<f64>),
) -> Result<Vec<f64>> {
    let n = chain.joint_count();
    let smooth_sqrt = cfg.smooth.sqrt();
    let residual = |q: &[f64]| -> Option<DVector<f64>> {
        let mut vals = Vec::with_capacity(3 * n + n);
        data_residual(q, &mut vals);
        for (qi, pi) in q.iter().zip(q_prev) {
            vals.push(smooth_sqrt * (qi - pi));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(DVector::from_vec(vals))
    };
    let opts = SolveOptions {
        max_iters: cfg.max_iters,
        step_tol: cfg.tol,
        ..Default::default()
    };
    let start = chain.clamp(q_prev);
    match minimize(start, residual, |q| {
        let clamped = chain.clamp(q);
        q.copy_from_slice(&clamped);
    }, &opts)
    {
        Ok(sol) => Ok(sol.params),
        Err(SolveError::InitialInfeasible) => Err(Error::NumericalFailure(
            "objective is not finite at the starting point".into(),
        )),
    }
}

/// Position retargeting: minimizes the weighted squared gap between scaled
/// keypoint targets and chain keypoints, plus `smooth * |q - q_prev|^2`,
/// over the joint box. Projected damped Gauss-Newton with finite-difference
/// Jacobians; the objective at the result never exceeds the objective at
/// the (clamped) starting point.
pub fn retarget_position(
    chain: &KinematicChain,
    targets: &[[f64; 3]],
    q_prev: &[f64],
    cfg: &RetargetConfig,
) -> Result<Vec<f64>> {
    cfg.validate(chain)?;
    validate_targets(chain, targets, q_prev)?;
    solve_retarget(chain, q_prev, cfg, |q, vals| {
        let kps = chain.keypoints_unclamped(q);
        for (i, (kp, target)) in kps.iter().zip(targets).enumerate() {
            let w = cfg.weight(i).sqrt();
            for d in 0..3 {
                vals.push(w * (cfg.scale * target[d] - kp[d]));
            }
        }
    })
}

/// Vector retargeting: aligns per-link direction vectors with target
/// vectors rotated by `frame_rotation`, same solver and penalty as
/// [`retarget_position`].
pub fn retarget_vector(
    chain: &KinematicChain,
    target_vectors: &[[f64; 3]],
    q_prev: &[f64],
    cfg: &RetargetConfig,
    frame_rotation: &Quat,
) -> Result<Vec<f64>> {
    cfg.validate(chain)?;
    validate_targets(chain, target_vectors, q_prev)?;
    solve_retarget(chain, q_prev, cfg, |q, vals| {
        let vecs = chain.link_vectors_unclamped(q);
        for (i, (v, target)) in vecs.iter().zip(target_vectors).enumerate() {
            let w = cfg.weight(i).sqrt();
            let rotated = frame_rotation.rotate(*v);
            for d in 0..3 {
                vals.push(w * (cfg.scale * target[d] - rotated[d]));
            }
        }
    })
}

/// Which residual the per-frame solves use.
#[derive(Debug, Clone, PartialEq)]
pub enum RetargetMode {
    Position,
    Vector { frame_rotation: Quat },
}

/// Optional base pose attached to each output frame.
pub type BasePose = ([f64; 3], Quat);

/// Retargets a whole keypoint trajectory. Keypoints are low-pass filtered
/// first (factor `cfg.keypoint_smoothing`), then each frame is solved with
/// the previous frame's solution as `q_prev`; frame 0 starts from joint
/// mid-range. The output trajectory carries the joint solutions, and
/// translation/orientation from `base` when provided (base origin and
/// identity otherwise).
pub fn retarget_trajectory(
    chain: &KinematicChain,
    keypoints: &[Vec<[f64; 3]>],
    dt: f64,
    demo_id: &str,
    cfg: &RetargetConfig,
    mode: &RetargetMode,
    base: Option<&[BasePose]>,
) -> Result<Trajectory> {
    cfg.validate(chain)?;
    if keypoints.is_empty() {
        return Err(Error::InvalidInput("keypoint trajectory is empty".into()));
    }
    let n = chain.joint_count();
    if keypoints.iter().any(|frame| frame.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "every keypoint frame must have {n} points"
        )));
    }
    if let Some(base) = base {
        if base.len() != keypoints.len() {
            return Err(Error::DimensionMismatch(
                "base poses must match keypoint frame count".into(),
            ));
        }
    }

    let flat: Vec<Vec<f64>> = keypoints
        .iter()
        .map(|frame| frame.iter().flat_map(|p| p.iter().copied()).collect())
        .collect();
    let filtered = low_pass(&flat, cfg.keypoint_smoothing)?;

    let mut q_prev = chain.mid_range();
    let mut frames = Vec::with_capacity(keypoints.len());
    for (t, row) in filtered.iter().enumerate() {
        let targets: Vec<[f64; 3]> = row
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let q = match mode {
            RetargetMode::Position => retarget_position(chain, &targets, &q_prev, cfg)?,
            RetargetMode::Vector { frame_rotation } => {
                retarget_vector(chain, &targets, &q_prev, cfg, frame_rotation)?
            }
        };
        let (translation, orientation) = base
            .map(|b| b[t])
            .unwrap_or(([0.0; 3], Quat::IDENTITY));
        frames.push(ActionFrame::new(translation, orientation, q.clone())?);
        q_prev = q;
    }
    Trajectory::new(frames, dt, Source::Human, demo_id)
}

/// Objective value of the position objective, exposed for tests and
/// diagnostics.
pub fn position_objective(
    chain: &KinematicChain,
    targets: &[[f64; 3]],
    q_prev: &[f64],
    cfg: &RetargetConfig,
    q: &[f64],
) -> Result<f64> {
    validate_targets(chain, targets, q_prev)?;
    if q.len() != chain.joint_count() {
        return Err(Error::DimensionMismatch("q length mismatch".into()));
    }
    let kps = chain.keypoints_unclamped(q);
    let mut acc = 0.0;
    for (i, (kp, target)) in kps.iter().zip(targets).enumerate() {
        let w = cfg.weight(i);
        for d in 0..3 {
            acc += w * (cfg.scale * target[d] - kp[d]).powi(2);
        }
    }
    for (qi, pi) in q.iter().zip(q_prev) {
        acc += cfg.smooth * (qi - pi) * (qi - pi);
    }
    Ok(acc)
}
