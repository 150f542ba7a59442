//! Temporal ensembling of overlapping action-chunk predictions.

use crate::error::{Error, Result};
use crate::quat::Quat;
use crate::traj::ActionFrame;

/// An action chunk predicted at `start_step`; frame `i` of `actions` is the
/// prediction for absolute step `start_step + i`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub start_step: usize,
    pub actions: Vec<ActionFrame>,
}

impl Prediction {
    pub fn covers(&self, step: usize) -> bool {
        step >= self.start_step && step - self.start_step < self.actions.len()
    }
}

/// Averages every prediction covering `query_step`, weighting each by
/// `exp(-decay * age)` where `age = query_step - start_step`. Translations
/// and joints are averaged linearly; orientations by a sign-aligned
/// weighted chordal mean. Weights are normalized to sum to one.
pub fn temporal_ensemble(
    predictions: &[Prediction],
    query_step: usize,
    decay: f64,
) -> Result<ActionFrame> {
    if !decay.is_finite() || decay <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "decay must be finite and positive, got {decay}"
        )));
    }
    let covering: Vec<(&ActionFrame, f64)> = predictions
        .iter()
        .filter(|p| p.covers(query_step))
        .map(|p| {
            let age = (query_step - p.start_step) as f64;
            (&p.actions[query_step - p.start_step], (-decay * age).exp())
        })
        .collect();
    if covering.is_empty() {
        return Err(Error::NotCovered(query_step));
    }
    let joint_dim = covering[0].0.joint_dim();
    if covering.iter().any(|(f, _)| f.joint_dim() != joint_dim) {
        return Err(Error::DimensionMismatch(
            "covering predictions disagree on joint dimension".into(),
        ));
    }
    let total: f64 = covering.iter().map(|(_, w)| w).sum();
    let mut translation = [0.0; 3];
    let mut joints = vec![0.0; joint_dim];
    for (frame, w) in &covering {
        let wn = w / total;
        let t = frame.translation();
        for d in 0..3 {
            translation[d] += wn * t[d];
        }
        for (acc, j) in joints.iter_mut().zip(frame.joints()) {
            *acc += wn * j;
        }
    }
    let quats: Vec<(Quat, f64)> = covering
        .iter()
        .map(|(f, w)| (*f.orientation(), w / total))
        .collect();
    let orientation = Quat::weighted_chordal_mean(&quats)?;
    ActionFrame::new(translation, orientation, joints)
}
