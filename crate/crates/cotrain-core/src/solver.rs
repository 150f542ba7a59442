//! Damped Gauss-Newton least squares with finite-difference Jacobians.
//!
//! Shared by calibration, PnP refinement, and retargeting. The residual
//! closure may declare a parameter vector infeasible (e.g. a point behind
//! the camera) by returning `None`; infeasible trial steps count as failed
//! and raise the damping factor. `retract` is applied to every accepted
//! iterate, which is where quaternion renormalization and joint-bound
//! clamping live.

use nalgebra::{DMatrix, DVector};

pub(crate) struct SolveOptions {
    pub max_iters: usize,
    pub step_tol: f64,
    pub lambda_init: f64,
    pub fd_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 100,
            step_tol: 1e-10,
            lambda_init: 1e-3,
            fd_step: 1e-6,
        }
    }
}

pub(crate) struct Solution {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub converged: bool,
    pub iters: usize,
}

pub(crate) enum SolveError {
    /// The residual could not be evaluated at the starting point.
    InitialInfeasible,
}

fn cost_of(r: &DVector<f64>) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central-difference Jacobian; falls back to one-sided differences when a
/// perturbed point is infeasible, and to a zero column when both sides are.
fn jacobian<F>(residual: &F, x: &[f64], base: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Option<DVector<f64>>,
{
    let m = base.len();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = residual(&probe);
        probe[j] = x[j] - h;
        let minus = residual(&probe);
        probe[j] = x[j];
        let col: Option<DVector<f64>> = match (plus, minus) {
            (Some(p), Some(m)) => Some((p - m) / (2.0 * h)),
            (Some(p), None) => Some((p - base) / h),
            (None, Some(m)) => Some((base - m) / h),
            (None, None) => None,
        };
        if let Some(col) = col {
            jac.set_column(j, &col);
        }
    }
    jac
}

pub(crate) fn minimize<F, R>(
    x0: Vec<f64>,
    residual: F,
    retract: R,
    opts: &SolveOptions,
) -> Result<Solution, SolveError>
where
    F: Fn(&[f64]) -> Option<DVector<f64>>,
    R: Fn(&mut [f64]),
{
    let mut x = x0;
    retract(&mut x);
    let mut r = match residual(&x) {
        Some(r) if r.iter().all(|v| v.is_finite()) => r,
        _ => return Err(SolveError::InitialInfeasible),
    };
    let mut cost = cost_of(&r);
    let mut lambda = opts.lambda_init;
    let n = x.len();
    let mut iters = 0;
    let mut converged = false;

    'outer: while iters < opts.max_iters {
        iters += 1;
        let jac = jacobian(&residual, &x, &r, opts.fd_step);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;

        // Retry the step with growing damping until the cost decreases.
        loop {
            let mut damped = jtj.clone();
            for d in 0..n {
                damped[(d, d)] += lambda;
            }
            let delta = match damped.clone().lu().solve(&(-&jtr)) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e14 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            retract(&mut trial);
            let trial_r = residual(&trial);
            let accepted = match trial_r {
                Some(tr) if tr.iter().all(|v| v.is_finite()) => {
                    let trial_cost = cost_of(&tr);
                    if trial_cost < cost {
                        // projected step length, measured after retraction
                        let step: f64 = trial
                            .iter()
                            .zip(&x)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        x = trial;
                        r = tr;
                        cost = trial_cost;
                        lambda = (lambda / 10.0).max(1e-12);
                        if step < opts.step_tol {
                            converged = true;
                            break 'outer;
                        }
                        true
                    } else {
                        false
                    }
                }
                _ => false,
            };
            if accepted {
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                // no descent direction left at any damping: local stop
                converged = true;
                break 'outer;
            }
        }
    }

    Ok(Solution {
        params: x,
        cost,
        converged,
        iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_linear_least_squares() {
        // residual r = A x - b with A = [[1,0],[0,2],[1,1]], b = [1,2,2]
        let residual = |x: &[f64]| {
            Some(DVector::from_vec(vec![
                x[0] - 1.0,
                2.0 * x[1] - 2.0,
                x[0] + x[1] - 2.0,
            ]))
        };
        let sol = minimize(vec![10.0, -3.0], residual, |_| {}, &SolveOptions::default())
            .ok()
            .unwrap();
        assert!(sol.cost < 1e-18);
        assert!((sol.params[0] - 1.0).abs() < 1e-9);
        assert!((sol.params[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_style_descent_is_monotone() {
        let residual =
            |x: &[f64]| Some(DVector::from_vec(vec![1.0 - x[0], 3.0 * (x[1] - x[0] * x[0])]));
        let sol = minimize(
            vec![-1.2, 1.0],
            residual,
            |_| {},
            &SolveOptions {
                max_iters: 200,
                ..Default::default()
            },
        )
        .ok()
        .unwrap();
        assert!(sol.cost < 1e-12, "cost {}", sol.cost);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let residual = |_: &[f64]| -> Option<DVector<f64>> { None };
        assert!(matches!(
            minimize(vec![0.0], residual, |_| {}, &SolveOptions::default()),
            Err(SolveError::InitialInfeasible)
        ));
    }

    #[test]
    fn retraction_keeps_iterates_in_bounds() {
        // minimize (x - 5)^2 subject to x <= 1 via clamping retraction
        let residual = |x: &[f64]| Some(DVector::from_vec(vec![x[0] - 5.0]));
        let sol = minimize(
            vec![0.0],
            residual,
            |x: &mut [f64]| x[0] = x[0].min(1.0),
            &SolveOptions::default(),
        )
        .ok()
        .unwrap();
        assert!((sol.params[0] - 1.0).abs() < 1e-9);
    }
}
