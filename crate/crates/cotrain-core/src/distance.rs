//! Frame-level distances feeding the alignment and retrieval layers.

use crate::error::{Error, Result};
use crate::quat::rot_distance;
use crate::traj::{ActionFrame, FeatureSequence, Trajectory};

/// Weighting coefficients of the action distance: `lambda1` scales the
/// hand-joint term, `lambda2` the orientation term. Translations are always
/// weighted 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistanceWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ActionDistanceWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<ActionDistanceWeights> {
        if !(lambda1.is_finite() && lambda2.is_finite()) || lambda1 < 0.0 || lambda2 < 0.0 {
            return Err(Error::InvalidInput(
                "distance weights must be finite and non-negative".into(),
            ));
        }
        Ok(ActionDistanceWeights { lambda1, lambda2 })
    }
}

impl Default for ActionDistanceWeights {
    fn default() -> Self {
        ActionDistanceWeights {
            lambda1: 1.0,
            lambda2: 0.5,
        }
    }
}

/// Action distance between two frames:
/// `|t_a - t_b|_1 + lambda1 * |p_a - p_b|_1 + lambda2 * d_rot(o_a, o_b)`.
/// Units are mixed (meters and radians); only the lambdas rebalance them.
pub fn d_act(a: &ActionFrame, b: &ActionFrame, w: &ActionDistanceWeights) -> Result<f64> {
    if a.joint_dim() != b.joint_dim() {
        return Err(Error::DimensionMismatch(format!(
            "joint dims differ: {} vs {}",
            a.joint_dim(),
            b.joint_dim()
        )));
    }
    let ta = a.translation();
    let tb = b.translation();
    let translation: f64 = (0..3).map(|d| (ta[d] - tb[d]).abs()).sum();
    let joints: f64 = a
        .joints()
        .iter()
        .zip(b.joints())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(translation + w.lambda1 * joints + w.lambda2 * rot_distance(a.orientation(), b.orientation()))
}

/// Euclidean distance between two feature vectors.
pub fn d_vis(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "feature dims differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Dense pairwise cost matrix, row-major with `rows` indexing the first
/// sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<CostMatrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("cost matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "cost matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// Evaluates `metric` on every pair; entry `(i, j)` is `metric(a[i], b[j])`.
pub fn cost_matrix<T, F>(a: &[T], b: &[T], metric: F) -> Result<CostMatrix>
where
    F: Fn(&T, &T) -> Result<f64>,
{
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "cost matrix needs non-empty sequences".into(),
        ));
    }
    let mut data = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            data.push(metric(x, y)?);
        }
    }
    CostMatrix::from_rows(a.len(), b.len(), data)
}

pub fn action_cost_matrix(
    a: &Trajectory,
    b: &Trajectory,
    w: &ActionDistanceWeights,
) -> Result<CostMatrix> {
    cost_matrix(a.frames(), b.frames(), |x, y| d_act(x, y, w))
}

pub fn visual_cost_matrix(a: &FeatureSequence, b: &FeatureSequence) -> Result<CostMatrix> {
    cost_matrix(a.rows(), b.rows(), |x, y| d_vis(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::Quat;
    use crate::traj::Source;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn frame(t: [f64; 3], q: Quat, joints: &[f64]) -> ActionFrame {
        ActionFrame::new(t, q, joints.to_vec()).unwrap()
    }

    #[test]
    fn identical_frames_have_zero_distance() {
        let f = frame([0.1, 0.2, 0.3], Quat::IDENTITY, &[0.4]);
        assert_eq!(d_act(&f, &f, &ActionDistanceWeights::default()).unwrap(), 0.0);
    }

    #[test]
    fn translation_only_is_l1() {
        let a = frame([0.0; 3], Quat::IDENTITY, &[1.0]);
        let b = frame([1.0, 0.0, 0.0], Quat::IDENTITY, &[2.0]);
        let w = ActionDistanceWeights::new(0.0, 0.0).unwrap();
        assert_eq!(d_act(&a, &b, &w).unwrap(), 1.0);
    }

    #[test]
    fn weighted_sum_of_components() {
        let a = frame([0.0; 3], Quat::IDENTITY, &[0.0]);
        let b = frame(
            [0.1, 0.0, 0.0],
            Quat::from_axis_angle([1.0, 0.0, 0.0], PI / 2.0).unwrap(),
            &[0.2],
        );
        let w = ActionDistanceWeights::new(1.0, 0.5).unwrap();
        assert_relative_eq!(
            d_act(&a, &b, &w).unwrap(),
            0.1 + 0.2 + 0.5 * PI / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn joint_dim_mismatch_errors() {
        let a = frame([0.0; 3], Quat::IDENTITY, &[0.0]);
        let b = frame([0.0; 3], Quat::IDENTITY, &[0.0, 1.0]);
        assert!(matches!(
            d_act(&a, &b, &ActionDistanceWeights::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn visual_distance_is_euclidean() {
        assert_eq!(d_vis(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(d_vis(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(d_vis(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn distances_are_symmetric_and_triangular() {
        let w = ActionDistanceWeights::default();
        let frames: Vec<ActionFrame> = (0..6)
            .map(|i| {
                let s = i as f64;
                frame(
                    [s.sin(), (2.0 * s).cos(), 0.1 * s],
                    Quat::from_axis_angle([1.0, 0.2 * s, 0.0], 0.5 * s).unwrap(),
                    &[s * 0.3, -s * 0.1],
                )
            })
            .collect();
        for a in &frames {
            for b in &frames {
                let ab = d_act(a, b, &w).unwrap();
                let ba = d_act(b, a, &w).unwrap();
                assert_relative_eq!(ab, ba, epsilon = 1e-12);
                for c in &frames {
                    let ac = d_act(a, c, &w).unwrap();
                    let cb = d_act(c, b, &w).unwrap();
                    assert!(ab <= ac + cb + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cost_matrix_zero_diagonal_for_identical_sequences() {
        let frames: Vec<ActionFrame> = (0..3)
            .map(|i| frame([i as f64, 0.0, 0.0], Quat::IDENTITY, &[]))
            .collect();
        let t = Trajectory::new(frames, 0.1, Source::Human, "a").unwrap();
        let m = action_cost_matrix(&t, &t, &ActionDistanceWeights::default()).unwrap();
        for i in 0..3 {
            assert_eq!(m.get(i, i), 0.0);
        }
    }

    #[test]
    fn cost_matrix_matches_per_cell_metric() {
        let a: Vec<f64> = vec![0.0, 1.0, 2.0, 3.0];
        let b: Vec<f64> = vec![10.0, 20.0, 30.0, 40.0, 50.0];
        let m = cost_matrix(&a, &b, |x, y| Ok((x - y).abs())).unwrap();
        assert_eq!(m.rows(), 4);
        assert_eq!(m.cols(), 5);
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                assert_eq!(m.get(i, j), (x - y).abs());
            }
        }
    }

    #[test]
    fn single_cell_matrix() {
        let m = cost_matrix(&[1.0f64], &[4.0], |x, y| Ok((x - y).abs())).unwrap();
        assert_eq!(m.get(0, 0), 3.0);
    }

    #[test]
    fn empty_sequences_error() {
        let empty: Vec<f64> = vec![];
        assert!(cost_matrix(&empty, &[1.0], |x, y| Ok(x - y)).is_err());
    }
}
