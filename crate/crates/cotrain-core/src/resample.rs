//! Sample-rate computation and trajectory resampling.
//!
//! Teleoperated robot demonstrations run slower than human ones. The ratio
//! `gamma` of mean robot to mean human duration is used to subsample robot
//! data to a human-comparable pace during alignment/training, and to
//! upsample predicted action chunks back to robot pace at execution time.

use crate::error::{Error, Result};
use crate::traj::{ActionFrame, FeatureSequence, Trajectory};

/// Ratio of mean robot duration to mean human duration.
pub fn compute_gamma(human_durations: &[f64], robot_durations: &[f64]) -> Result<f64> {
    let mean = |label: &str, xs: &[f64]| -> Result<f64> {
        if xs.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{label} duration list is empty"
            )));
        }
        if xs.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "{label} durations must be finite and positive"
            )));
        }
        Ok(xs.iter().sum::<f64>() / xs.len() as f64)
    };
    Ok(mean("robot", robot_durations)? / mean("human", human_durations)?)
}

fn subsample_indices(len: usize, gamma: f64, k: usize) -> Result<Vec<usize>> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "gamma must be finite and positive, got {gamma}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let last = (gamma * (k - 1) as f64).round() as usize;
    if last >= len {
        return Err(Error::OutOfRange(format!(
            "subsample window needs index {last} but sequence has {len} steps"
        )));
    }
    Ok((0..k).map(|i| (gamma * i as f64).round() as usize).collect())
}

/// Picks `k` frames at indices `round(i * gamma)` and scales `dt` by `gamma`.
pub fn subsample(traj: &Trajectory, gamma: f64, k: usize) -> Result<Trajectory> {
    let indices = subsample_indices(traj.len(), gamma, k)?;
    let frames = indices.iter().map(|&i| traj.frame(i).clone()).collect();
    Trajectory::new(frames, traj.dt() * gamma, traj.source(), traj.demo_id())
}

/// Row-wise analogue of [`subsample`] so feature tracks stay aligned with
/// the subsampled trajectory they belong to.
pub fn subsample_features(features: &FeatureSequence, gamma: f64, k: usize) -> Result<FeatureSequence> {
    let indices = subsample_indices(features.len(), gamma, k)?;
    let rows = indices.iter().map(|&i| features.row(i).to_vec()).collect();
    FeatureSequence::new(rows, features.demo_id())
}

/// Upsamples an action chunk by `gamma >= 1` to `round(gamma * k)` frames.
///
/// Output frame `j` samples the piecewise interpolant at input time
/// `min(j / gamma, k - 1)`; the final output frame is pinned to the final
/// input frame. Translations and joints interpolate linearly, orientations
/// by slerp. Input frames landing exactly on the grid are cloned, so
/// endpoints are preserved bit-exactly.
pub fn upsample(actions: &[ActionFrame], gamma: f64) -> Result<Vec<ActionFrame>> {
    let k = actions.len();
    if k < 2 {
        return Err(Error::InvalidInput(
            "upsample needs at least two frames".into(),
        ));
    }
    if !gamma.is_finite() || gamma < 1.0 {
        return Err(Error::InvalidInput(format!(
            "upsample rate must be >= 1, got {gamma}"
        )));
    }
    let joint_dim = actions[0].joint_dim();
    if actions.iter().any(|f| f.joint_dim() != joint_dim) {
        return Err(Error::DimensionMismatch(
            "all frames must share the same joint dimension".into(),
        ));
    }
    let m = (gamma * k as f64).round() as usize;
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        if j == m - 1 {
            out.push(actions[k - 1].clone());
            continue;
        }
        let s = (j as f64 / gamma).min((k - 1) as f64);
        let i0 = s.floor() as usize;
        let u = s - i0 as f64;
        if u == 0.0 {
            out.push(actions[i0].clone());
            continue;
        }
        let a = &actions[i0];
        let b = &actions[i0 + 1];
        let ta = a.translation();
        let tb = b.translation();
        let translation = [
            ta[0] + u * (tb[0] - ta[0]),
            ta[1] + u * (tb[1] - ta[1]),
            ta[2] + u * (tb[2] - ta[2]),
        ];
        let joints = a
            .joints()
            .iter()
            .zip(b.joints())
            .map(|(ja, jb)| ja + u * (jb - ja))
            .collect();
        let orientation = a.orientation().slerp(b.orientation(), u);
        out.push(ActionFrame::new(translation, orientation, joints)?);
    }
    Ok(out)
}
