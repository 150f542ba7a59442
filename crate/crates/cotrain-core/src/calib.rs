//! Best-fit rigid calibration and perspective-n-point pose refinement.

use nalgebra::{DVector, Matrix3};

use crate::error::{Error, Result};
use crate::quat::Quat;
use crate::solver::{minimize, SolveError, SolveOptions, Solution};
use crate::transform::{PinholeCamera, RigidTransform};

fn centroid(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for d in 0..3 {
            c[d] += p[d];
        }
    }
    [c[0] / n, c[1] / n, c[2] / n]
}

/// Rank of the centered point spread, judged by singular values relative to
/// the largest. Collinear sets have rank < 2 and admit no unique rotation.
fn spread_rank(points: &[[f64; 3]]) -> usize {
    let c = centroid(points);
    let mut cov: Matrix3<f64> = Matrix3::zeros();
    for p in points {
        let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    let singular = cov.svd(false, false).singular_values;
    let max: f64 = singular.max();
    if max <= 0.0 {
        return 0;
    }
    singular.iter().filter(|&&s| s > 1e-10 * max).count()
}

fn validate_point_sets(a: &[[f64; 3]], b: &[[f64; 3]], min_n: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "point sets differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min_n {
        return Err(Error::InsufficientData(format!(
            "need at least {min_n} point pairs, got {}",
            a.len()
        )));
    }
    if a.iter()
        .chain(b.iter())
        .any(|p| p.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidInput("points must be finite".into()));
    }
    Ok(())
}

/// The 24 rotations of the octahedral group as quaternions. Used as
/// restart seeds so the local solver reaches the global optimum from any
/// true rotation (every rotation is within ~62 degrees of some element).
fn rotation_seeds() -> Vec<Quat> {
    let mut seeds = vec![Quat::IDENTITY];
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for axis in axes {
        for angle in [
            std::f64::consts::FRAC_PI_2,
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::PI,
        ] {
            seeds.push(Quat::from_axis_angle(axis, angle).expect("fixed axis"));
        }
    }
    // 120-degree turns about the four cube diagonals
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for angle in [2.0 * std::f64::consts::FRAC_PI_3, -2.0 * std::f64::consts::FRAC_PI_3] {
                seeds.push(Quat::from_axis_angle([sx, sy, 1.0], angle).expect("fixed axis"));
            }
        }
    }
    // 180-degree turns about the six edge midpoints
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for sign in [1.0, -1.0] {
            let mut axis = [0.0; 3];
            axis[a] = 1.0;
            axis[b] = sign;
            seeds.push(Quat::from_axis_angle(axis, std::f64::consts::PI).expect("fixed axis"));
        }
    }
    debug_assert_eq!(seeds.len(), 24);
    seeds
}

fn params_to_transform(params: &[f64]) -> RigidTransform {
    let q = Quat::new(params[0], params[1], params[2], params[3])
        .unwrap_or(Quat::IDENTITY);
    RigidTransform::new(q, [params[4], params[5], params[6]])
        .expect("finite params produce a valid transform")
}

fn renormalize_quat_params(params: &mut [f64]) {
    if let Ok(q) = Quat::new(params[0], params[1], params[2], params[3]) {
        let w = q.wxyz();
        params[..4].copy_from_slice(&w);
    }
}

/// Least-squares fit of the rigid transform mapping `cam_points` onto
/// `rob_points`, parameterized by a unit quaternion plus translation and
/// solved by damped Gauss-Newton with renormalization after every accepted
/// step. Restarts over a fixed rotation grid keep the solve global.
///
/// Returns the transform and the root-mean-square residual.
pub fn fit_rigid(
    cam_points: &[[f64; 3]],
    rob_points: &[[f64; 3]],
) -> Result<(RigidTransform, f64)> {
    validate_point_sets(cam_points, rob_points, 3)?;
    if spread_rank(cam_points) < 2 || spread_rank(rob_points) < 2 {
        return Err(Error::Degenerate(
            "point spread is collinear or a single point".into(),
        ));
    }
    let n = cam_points.len();
    let residual = |params: &[f64]| -> Option<DVector<f64>> {
        let q = Quat::new(params[0], params[1], params[2], params[3]).ok()?;
        let t = [params[4], params[5], params[6]];
        let mut r = DVector::zeros(3 * n);
        for (i, (c, b)) in cam_points.iter().zip(rob_points).enumerate() {
            let m = q.rotate(*c);
            for d in 0..3 {
                r[3 * i + d] = b[d] - (m[d] + t[d]);
            }
        }
        Some(r)
    };

    let opts = SolveOptions {
        max_iters: 100,
        step_tol: 1e-12,
        ..Default::default()
    };
    let cam_c = centroid(cam_points);
    let rob_c = centroid(rob_points);
    let mut best: Option<Solution> = None;
    for seed in rotation_seeds() {
        let rc = seed.rotate(cam_c);
        let w = seed.wxyz();
        let x0 = vec![
            w[0],
            w[1],
            w[2],
            w[3],
            rob_c[0] - rc[0],
            rob_c[1] - rc[1],
            rob_c[2] - rc[2],
        ];
        let sol = match minimize(x0, residual, renormalize_quat_params, &opts) {
            Ok(s) => s,
            Err(SolveError::InitialInfeasible) => continue,
        };
        let better = best.as_ref().map_or(true, |b| sol.cost < b.cost);
        if better {
            best = Some(sol);
        }
        if best.as_ref().is_some_and(|b| b.cost <= 1e-22 * n as f64) {
            break; // exact fit found, remaining restarts cannot improve
        }
    }
    let best = best.ok_or_else(|| Error::NumericalFailure("all restarts infeasible".into()))?;
    let rmse = (best.cost / n as f64).sqrt();
    Ok((params_to_transform(&best.params), rmse))
}

/// Gauss-Newton refinement of a 6-DoF pose from 2D-3D correspondences,
/// starting at `initial`. Minimizes squared pixel reprojection error;
/// converges when the step norm drops below 1e-10 or errors out with
/// `NoConvergence` (carrying the best iterate) after 100 iterations.
pub fn solve_pnp(
    object_points: &[[f64; 3]],
    image_points: &[[f64; 2]],
    camera: &PinholeCamera,
    initial: &RigidTransform,
) -> Result<RigidTransform> {
    if object_points.len() != image_points.len() {
        return Err(Error::DimensionMismatch(format!(
            "object/image point counts differ: {} vs {}",
            object_points.len(),
            image_points.len()
        )));
    }
    if object_points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "pnp needs at least 4 points, got {}",
            object_points.len()
        )));
    }
    if object_points.iter().any(|p| p.iter().any(|v| !v.is_finite()))
        || image_points.iter().any(|p| p.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidInput("points must be finite".into()));
    }
    let n = object_points.len();
    let residual = |params: &[f64]| -> Option<DVector<f64>> {
        let q = Quat::new(params[0], params[1], params[2], params[3]).ok()?;
        let t = [params[4], params[5], params[6]];
        let mut r = DVector::zeros(2 * n);
        for (i, (obj, px)) in object_points.iter().zip(image_points).enumerate() {
            let m = q.rotate(*obj);
            let p_cam = [m[0] + t[0], m[1] + t[1], m[2] + t[2]];
            let proj = camera.project(p_cam).ok()?;
            r[2 * i] = px[0] - proj[0];
            r[2 * i + 1] = px[1] - proj[1];
        }
        Some(r)
    };

    let qi = initial.rotation().wxyz();
    let ti = initial.translation();
    let x0 = vec![qi[0], qi[1], qi[2], qi[3], ti[0], ti[1], ti[2]];
    let opts = SolveOptions {
        max_iters: 100,
        step_tol: 1e-10,
        ..Default::default()
    };
    let sol = match minimize(x0, residual, renormalize_quat_params, &opts) {
        Ok(s) => s,
        Err(SolveError::InitialInfeasible) => {
            return Err(Error::BehindCamera(
                "a point has non-positive depth under the initial pose".into(),
            ))
        }
    };
    let transform = params_to_transform(&sol.params);
    if !sol.converged {
        return Err(Error::NoConvergence {
            iters: sol.iters,
            rmse: (sol.cost / n as f64).sqrt(),
            best: Box::new(transform),
        });
    }
    Ok(transform)
}

/// Pixel-space root-mean-square reprojection error of `pose` on the given
/// correspondences.
pub fn reprojection_rmse(
    object_points: &[[f64; 3]],
    image_points: &[[f64; 2]],
    camera: &PinholeCamera,
    pose: &RigidTransform,
) -> Result<f64> {
    if object_points.len() != image_points.len() || object_points.is_empty() {
        return Err(Error::DimensionMismatch(
            "object/image point counts must match and be non-empty".into(),
        ));
    }
    let mut acc = 0.0;
    for (obj, px) in object_points.iter().zip(image_points) {
        let proj = camera.project(pose.apply(*obj))?;
        acc += (proj[0] - px[0]).powi(2) + (proj[1] - px[1]).powi(2);
    }
    Ok((acc / object_points.len() as f64).sqrt())
}
