//! Movement-smoothness and dataset-similarity metrics: the spectral arc
//! length of a speed profile, and the mean aligned action distance between
//! trajectory sets.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::align::dtw;
use crate::distance::{action_cost_matrix, ActionDistanceWeights};
use crate::error::{Error, Result};
use crate::quat::rot_distance;
use crate::traj::Trajectory;

/// Spectral arc length parameters: zero-padding factor, cutoff-frequency
/// ceiling in hertz, and the amplitude threshold of the adaptive cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparcConfig {
    pub pad_factor: usize,
    pub omega_c_max: f64,
    pub amp_threshold: f64,
}

impl Default for SparcConfig {
    fn default() -> Self {
        SparcConfig {
            pad_factor: 4,
            omega_c_max: 15.0,
            amp_threshold: 0.05,
        }
    }
}

impl SparcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pad_factor == 0 {
            return Err(Error::InvalidInput("pad_factor must be >= 1".into()));
        }
        if !self.omega_c_max.is_finite() || self.omega_c_max <= 0.0 {
            return Err(Error::InvalidInput("omega_c_max must be positive".into()));
        }
        if !self.amp_threshold.is_finite() || !(0.0..1.0).contains(&self.amp_threshold)
            || self.amp_threshold == 0.0
        {
            return Err(Error::InvalidInput(
                "amp_threshold must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Finite-difference translational speed, `|p[t+1] - p[t]| / dt`.
pub fn speed_profile(traj: &Trajectory) -> Result<Vec<f64>> {
    if traj.len() < 2 {
        return Err(Error::InsufficientData(
            "speed profile needs at least two frames".into(),
        ));
    }
    Ok(traj
        .frames()
        .windows(2)
        .map(|w| {
            let a = w[0].translation();
            let b = w[1].translation();
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
                / traj.dt()
        })
        .collect())
}

/// Spectral arc length value plus the adaptive cutoff it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparcResult {
    /// Negative arc length of the DC-normalized magnitude spectrum over the
    /// retained band; higher (closer to zero) means smoother.
    pub value: f64,
    /// Selected cutoff frequency in hertz.
    pub omega_c: f64,
}

/// Spectral arc length of a speed profile sampled at `dt` seconds.
///
/// The profile is zero-padded to `pad_factor` times the next power of two,
/// the magnitude spectrum is normalized by its DC value, the cutoff is the
/// smallest grid frequency beyond which the normalized spectrum stays below
/// `amp_threshold` (capped at `omega_c_max`), and the result is the
/// negative arc length of the piecewise-linear spectrum over `[0, cutoff]`.
pub fn sparc(speed: &[f64], dt: f64, cfg: &SparcConfig) -> Result<SparcResult> {
    cfg.validate()?;
    if speed.len() < 4 {
        return Err(Error::InvalidInput(
            "sparc needs at least 4 speed samples".into(),
        ));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    if speed.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("speed samples must be finite".into()));
    }

    let n_fft = cfg.pad_factor * speed.len().next_power_of_two();
    let mut buffer: Vec<Complex<f64>> = speed
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buffer);

    let half = n_fft / 2;
    let magnitude: Vec<f64> = buffer[..=half].iter().map(|c| c.norm()).collect();
    if magnitude[0] == 0.0 {
        return Err(Error::DegenerateProfile(
            "spectrum has zero DC component".into(),
        ));
    }
    let normalized: Vec<f64> = magnitude.iter().map(|m| m / magnitude[0]).collect();
    let freq: Vec<f64> = (0..=half)
        .map(|k| k as f64 / (n_fft as f64 * dt))
        .collect();

    // smallest grid frequency with everything above it below the threshold
    let idx_last = (0..normalized.len())
        .rev()
        .find(|&k| normalized[k] >= cfg.amp_threshold)
        .unwrap_or(0);
    let omega_c = cfg.omega_c_max.min(freq[idx_last]);
    let band_end = (0..freq.len())
        .rev()
        .find(|&k| freq[k] <= omega_c)
        .unwrap_or(0);

    let mut arc = 0.0;
    for k in 0..band_end {
        let df = (freq[k + 1] - freq[k]) / omega_c;
        let ds = normalized[k + 1] - normalized[k];
        arc += (df * df + ds * ds).sqrt();
    }
    Ok(SparcResult {
        value: -arc,
        omega_c,
    })
}

fn path_mean_pose_distance(
    a: &Trajectory,
    b: &Trajectory,
    weights: &ActionDistanceWeights,
) -> Result<f64> {
    let cost = action_cost_matrix(a, b, weights)?;
    let path = dtw(&cost)?;
    let mut acc = 0.0;
    for &(i, j) in &path.pairs {
        let fa = a.frame(i);
        let fb = b.frame(j);
        let ta = fa.translation();
        let tb = fb.translation();
        let translation: f64 = (0..3).map(|d| (ta[d] - tb[d]).abs()).sum();
        acc += translation + weights.lambda2 * rot_distance(fa.orientation(), fb.orientation());
    }
    Ok(acc / path.pairs.len() as f64)
}

/// Mean over all human-robot demo pairs of the per-step translation plus
/// weighted orientation distance along the DTW warp path (alignment itself
/// uses the full action distance including the joint term).
pub fn action_distance(
    humans: &[Trajectory],
    robots: &[Trajectory],
    weights: &ActionDistanceWeights,
) -> Result<f64> {
    if humans.is_empty() || robots.is_empty() {
        return Err(Error::InvalidInput(
            "action distance needs non-empty sets".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..humans.len())
        .flat_map(|i| (0..robots.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| path_mean_pose_distance(&humans[i], &robots[j], weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean aligned distance over unordered pairs within one set, excluding
/// self-pairs: the diversity statistic of a dataset.
pub fn action_distance_intra(
    trajs: &[Trajectory],
    weights: &ActionDistanceWeights,
) -> Result<f64> {
    if trajs.len() < 2 {
        return Err(Error::InsufficientData(
            "intra-set distance needs at least two demos".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..trajs.len())
        .flat_map(|i| (i + 1..trajs.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| path_mean_pose_distance(&trajs[i], &trajs[j], weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::Quat;
    use crate::traj::{ActionFrame, Source};
    use approx::assert_relative_eq;

    fn traj_from_positions(positions: &[[f64; 3]], dt: f64) -> Trajectory {
        let frames = positions
            .iter()
            .map(|&p| ActionFrame::new(p, Quat::IDENTITY, vec![]).unwrap())
            .collect();
        Trajectory::new(frames, dt, Source::Robot, "t").unwrap()
    }

    #[test]
    fn stationary_trajectory_has_zero_speed() {
        let t = traj_from_positions(&[[1.0, 2.0, 3.0]; 5], 0.1);
        assert!(speed_profile(&t).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_motion_has_constant_speed() {
        let positions: Vec<[f64; 3]> = (0..6).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let t = traj_from_positions(&positions, 0.1);
        for v in speed_profile(&t).unwrap() {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn speed_matches_per_step_oracle() {
        let positions: Vec<[f64; 3]> = (0..20)
            .map(|i| {
                let s = i as f64;
                [s.sin(), (0.5 * s).cos(), 0.05 * s]
            })
            .collect();
        let dt = 0.05;
        let t = traj_from_positions(&positions, dt);
        let speeds = speed_profile(&t).unwrap();
        for (i, v) in speeds.iter().enumerate() {
            let d: f64 = (0..3)
                .map(|d| (positions[i + 1][d] - positions[i][d]).powi(2))
                .sum::<f64>()
                .sqrt()
                / dt;
            assert_relative_eq!(*v, d, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_frame_is_insufficient() {
        let t = traj_from_positions(&[[0.0; 3]], 0.1);
        assert!(matches!(
            speed_profile(&t),
            Err(Error::InsufficientData(_))
        ));
    }

    fn min_jerk_speed(n: usize) -> (Vec<f64>, f64) {
        let dt = 1.0 / (n - 1) as f64;
        let speed = (0..n)
            .map(|i| {
                let u = i as f64 * dt;
                30.0 * u * u * (1.0 - u) * (1.0 - u)
            })
            .collect();
        (speed, dt)
    }

    #[test]
    fn amplitude_scaling_by_powers_of_two_is_bitwise_invariant() {
        let (speed, dt) = min_jerk_speed(200);
        let base = sparc(&speed, dt, &SparcConfig::default()).unwrap();
        for c in [2.0, 0.5, 8.0] {
            let scaled: Vec<f64> = speed.iter().map(|v| v * c).collect();
            let s = sparc(&scaled, dt, &SparcConfig::default()).unwrap();
            assert_eq!(s.value, base.value);
            assert_eq!(s.omega_c, base.omega_c);
        }
    }

    #[test]
    fn amplitude_scaling_is_invariant_to_machine_precision() {
        let (speed, dt) = min_jerk_speed(200);
        let base = sparc(&speed, dt, &SparcConfig::default()).unwrap();
        for c in [3.0, 0.7, 1234.5] {
            let scaled: Vec<f64> = speed.iter().map(|v| v * c).collect();
            let s = sparc(&scaled, dt, &SparcConfig::default()).unwrap();
            assert_relative_eq!(s.value, base.value, max_relative = 1e-12);
        }
    }

    #[test]
    fn sparc_is_strictly_negative() {
        let (speed, dt) = min_jerk_speed(128);
        assert!(sparc(&speed, dt, &SparcConfig::default()).unwrap().value < 0.0);
    }

    #[test]
    fn high_frequency_perturbation_scores_lower() {
        let (speed, dt) = min_jerk_speed(200);
        let clean = sparc(&speed, dt, &SparcConfig::default()).unwrap();
        let perturbed: Vec<f64> = speed
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.2 * (2.0 * std::f64::consts::PI * 8.0 * i as f64 * dt).sin())
            .collect();
        let noisy = sparc(&perturbed, dt, &SparcConfig::default()).unwrap();
        assert!(noisy.value < clean.value, "{} vs {}", noisy.value, clean.value);
    }

    #[test]
    fn degenerate_profile_errors() {
        assert!(matches!(
            sparc(&[0.0; 16], 0.1, &SparcConfig::default()),
            Err(Error::DegenerateProfile(_))
        ));
        assert!(sparc(&[1.0, 2.0], 0.1, &SparcConfig::default()).is_err());
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let positions: Vec<[f64; 3]> = (0..10).map(|i| [i as f64 * 0.05, 0.0, 0.0]).collect();
        let t = traj_from_positions(&positions, 0.1);
        let d = action_distance(
            &[t.clone()],
            &[t],
            &ActionDistanceWeights::default(),
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn constant_offset_gives_l1_of_offset() {
        // identical timing, so the warp path is the diagonal and every step
        // contributes exactly |delta|_1
        let positions: Vec<[f64; 3]> = (0..8).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let a = traj_from_positions(&positions, 0.1);
        let shifted: Vec<[f64; 3]> = positions
            .iter()
            .map(|p| [p[0] + 0.01, p[1] + 0.02, p[2] - 0.03])
            .collect();
        let b = traj_from_positions(&shifted, 0.1);
        let d = action_distance(&[a], &[b], &ActionDistanceWeights::default()).unwrap();
        assert_relative_eq!(d, 0.06, epsilon = 1e-12);
    }

    #[test]
    fn intra_distance_needs_two_and_is_nonnegative() {
        let positions: Vec<[f64; 3]> = (0..8).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let a = traj_from_positions(&positions, 0.1);
        assert!(action_distance_intra(&[a.clone()], &ActionDistanceWeights::default()).is_err());
        let shifted: Vec<[f64; 3]> = positions.iter().map(|p| [p[0], p[1] + 0.1, p[2]]).collect();
        let b = traj_from_positions(&shifted, 0.1);
        let d = action_distance_intra(&[a, b], &ActionDistanceWeights::default()).unwrap();
        assert!(d > 0.0);
    }

    #[test]
    fn action_distance_is_symmetric() {
        let p1: Vec<[f64; 3]> = (0..9).map(|i| [(i as f64 * 0.4).sin(), 0.0, 0.0]).collect();
        let p2: Vec<[f64; 3]> = (0..7).map(|i| [(i as f64 * 0.3).cos(), 0.1, 0.0]).collect();
        let a = traj_from_positions(&p1, 0.1);
        let b = traj_from_positions(&p2, 0.1);
        let w = ActionDistanceWeights::default();
        let ab = action_distance(&[a.clone()], &[b.clone()], &w).unwrap();
        let ba = action_distance(&[b], &[a], &w).unwrap();
        assert_eq!(ab, ba);
    }
}
