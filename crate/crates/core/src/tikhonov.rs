//! The Tikhonov approximation curve and the minimal-norm saddle point.
//!
//! For a reference saddle (x*, y*) the merit function
//! Phi(z) = L(x, y*) - L(x*, y) is convex with optimal value 0 on the saddle
//! set; adding (eps/2)|z|^2 makes it eps-strongly convex with a unique
//! minimizer z_eps. Following z_eps along a decreasing eps schedule with warm
//! starts converges to the minimal-norm saddle point. Solves are first-order
//! only (gradient descent with Armijo backtracking): strong convexity gives
//! linear convergence and the problem abstraction carries no Hessians.

use crate::dynamics::kkt_residual;
use crate::linalg::Vector;
use crate::problem::{SaddlePoint, SaddleProblem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("iteration cap {cap} exceeded at epsilon = {epsilon:e}")]
    IterationCap { epsilon: f64, cap: usize },
    #[error("regularized objective failed to decrease at epsilon = {epsilon:e}")]
    NonMonotone { epsilon: f64 },
    #[error("invalid epsilon schedule: {0}")]
    InvalidSchedule(String),
    #[error("path did not converge: {0}")]
    NonConvergent(String),
}

/// One solved point of the approximation curve.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub epsilon: f64,
    /// Concatenated (x, y).
    pub z: Vector,
    /// Residual of the regularized optimality system at z.
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Evidence that the curve limit was reached.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub final_epsilon: f64,
    /// Distance between the last two curve points.
    pub cauchy_gap: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone)]
pub struct MinNormSolution {
    /// The minimal-norm saddle point, concatenated.
    pub z: Vector,
    pub certificate: Certificate,
    pub path: Vec<PathPoint>,
}

impl MinNormSolution {
    pub fn saddle(&self, n: usize) -> SaddlePoint {
        let (x, y) = self.z.split(n);
        SaddlePoint { x, y }
    }
}

/// Phi(z) = L(x, y*) - L(x*, y); the blocks decouple for a fixed reference.
pub fn phi_value(problem: &dyn SaddleProblem, saddle: &SaddlePoint, z: &Vector) -> f64 {
    let (x, y) = z.split(problem.primal_dim());
    let k = problem.coupling();
    let primal = problem.f(&x) + k.apply(&x).expect("dims").dot(&saddle.y) - problem.g(&saddle.y);
    let dual = problem.f(&saddle.x) + k.apply(&saddle.x).expect("dims").dot(&y) - problem.g(&y);
    primal - dual
}

/// grad Phi(z) = (grad_f(x) + K^T y*, grad_g(y) - K x*).
pub fn phi_grad(problem: &dyn SaddleProblem, saddle: &SaddlePoint, z: &Vector) -> Vector {
    let (x, y) = z.split(problem.primal_dim());
    let k = problem.coupling();
    let mut gx = problem.grad_f(&x);
    gx.add_scaled(1.0, &k.apply_transpose(&saddle.y).expect("dims"));
    let mut gy = problem.grad_g(&y);
    gy.add_scaled(-1.0, &k.apply(&saddle.x).expect("dims"));
    gx.concat(&gy)
}

fn regularized_value(
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
    z: &Vector,
    epsilon: f64,
) -> f64 {
    phi_value(problem, saddle, z) + 0.5 * epsilon * z.norm_sq()
}

fn regularized_grad(
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
    z: &Vector,
    epsilon: f64,
) -> Vector {
    let mut g = phi_grad(problem, saddle, z);
    g.add_scaled(epsilon, z);
    g
}

/// Matrix-free power iteration on the local curvature of the regularized
/// merit function, probed by gradient differences around z.
fn local_lipschitz_estimate(
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
    z: &Vector,
    epsilon: f64,
) -> f64 {
    let dim = z.dim();
    let h = 1e-6 * (1.0 + z.norm());
    let g0 = regularized_grad(problem, saddle, z, epsilon);
    let mut v = Vector::from_vec(vec![1.0 / (dim as f64).sqrt(); dim]);
    let mut estimate = epsilon.max(1e-12);
    for _ in 0..8 {
        let mut probe = z.clone();
        probe.add_scaled(h, &v);
        let g1 = regularized_grad(problem, saddle, &probe, epsilon);
        let w = {
            let mut w = g1;
            w.add_scaled(-1.0, &g0);
            w.scaled(1.0 / h)
        };
        let norm = w.norm();
        if norm <= 1e-14 {
            break;
        }
        estimate = norm;
        v = w.scaled(1.0 / norm);
    }
    estimate
}

pub const SOLVE_ITERATION_CAP: usize = 1_000_000;
const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK_SHRINK: f64 = 0.5;

/// Minimizes Phi + (eps/2)|z|^2 to gradient norm <= tol by gradient descent
/// with Armijo backtracking, warm-startable from `z_init`.
pub fn solve_regularized(
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
    epsilon: f64,
    z_init: &Vector,
    tol: f64,
) -> Result<PathPoint, PathError> {
    assert!(epsilon > 0.0 && tol > 0.0, "need epsilon > 0 and tol > 0");
    let step0 = 1.0 / (epsilon + local_lipschitz_estimate(problem, saddle, z_init, epsilon));

    let mut z = z_init.clone();
    let mut value = regularized_value(problem, saddle, &z, epsilon);
    let mut iterations = 0usize;
    loop {
        let grad = regularized_grad(problem, saddle, &z, epsilon);
        let grad_norm = grad.norm();
        if grad_norm <= tol {
            return Ok(PathPoint {
                epsilon,
                z,
                grad_norm,
                iterations,
            });
        }
        if iterations >= SOLVE_ITERATION_CAP {
            return Err(PathError::IterationCap {
                epsilon,
                cap: SOLVE_ITERATION_CAP,
            });
        }

        let mut step = step0;
        let mut accepted = false;
        for _ in 0..64 {
            let mut trial = z.clone();
            trial.add_scaled(-step, &grad);
            let trial_value = regularized_value(problem, saddle, &trial, epsilon);
            if trial_value <= value - ARMIJO_C1 * step * grad_norm * grad_norm {
                if trial_value > value {
                    return Err(PathError::NonMonotone { epsilon });
                }
                z = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            step *= BACKTRACK_SHRINK;
        }
        if !accepted {
            // step underflowed the line search; gradient is numerically flat
            return Ok(PathPoint {
                epsilon,
                z,
                grad_norm,
                iterations,
            });
        }
        iterations += 1;
    }
}

/// The default curve schedule 10^0, 10^-1, ..., 10^-8.
pub fn default_epsilon_schedule() -> Vec<f64> {
    (0..=8).map(|k| 10f64.powi(-k)).collect()
}

pub const CAUCHY_GAP_TOL: f64 = 1e-7;
pub const KKT_TOL: f64 = 1e-8;
const LEVEL_SOLVE_TOL: f64 = 1e-10;

/// Follows the approximation curve along `schedule` with warm starts and
/// returns the limit once consecutive curve points are Cauchy and the KKT
/// residual certifies a saddle point.
pub fn min_norm_solution(
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
    schedule: &[f64],
) -> Result<MinNormSolution, PathError> {
    if schedule.len() < 2 {
        return Err(PathError::InvalidSchedule(
            "need at least two epsilon levels".into(),
        ));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) || schedule.iter().any(|&e| e <= 0.0) {
        return Err(PathError::InvalidSchedule(
            "levels must be positive and strictly decreasing".into(),
        ));
    }
    if *schedule.last().unwrap() > 1e-8 {
        return Err(PathError::InvalidSchedule(format!(
            "schedule must reach 1e-8, ends at {:e}",
            schedule.last().unwrap()
        )));
    }

    let n = problem.primal_dim();
    let dim = n + problem.dual_dim();
    let mut z = Vector::zeros(dim);
    let mut path: Vec<PathPoint> = Vec::with_capacity(schedule.len());
    let mut gaps: Vec<f64> = Vec::new();

    for &epsilon in schedule {
        let point = solve_regularized(problem, saddle, epsilon, &z, LEVEL_SOLVE_TOL)?;
        if let Some(prev) = path.last() {
            let gap = {
                let mut d = point.z.clone();
                d.add_scaled(-1.0, &prev.z);
                d.norm()
            };
            gaps.push(gap);
            let (x, y) = point.z.split(n);
            let kkt = kkt_residual(problem, &x, &y);
            if gap <= CAUCHY_GAP_TOL && kkt <= KKT_TOL {
                let certificate = Certificate {
                    final_epsilon: epsilon,
                    cauchy_gap: gap,
                    kkt_residual: kkt,
                };
                let z = point.z.clone();
                path.push(point);
                return Ok(MinNormSolution {
                    z,
                    certificate,
                    path,
                });
            }
            if gaps.len() >= 3 {
                let tail = &gaps[gaps.len() - 3..];
                if tail[1] >= tail[0] && tail[2] >= tail[1] && tail[2] > CAUCHY_GAP_TOL {
                    return Err(PathError::NonConvergent(format!(
                        "curve gaps not decreasing over three levels: {:e}, {:e}, {:e}",
                        tail[0], tail[1], tail[2]
                    )));
                }
            }
        }
        z = point.z.clone();
        path.push(point);
    }

    let (x, y) = z.split(n);
    Err(PathError::NonConvergent(format!(
        "schedule exhausted with cauchy gap {:e} and KKT residual {:e}",
        gaps.last().copied().unwrap_or(f64::NAN),
        kkt_residual(problem, &x, &y)
    )))
}

/// Both sides of the curve inequality
/// (eps/2)(|z - z_eps|^2 + |z_eps|^2 - |z*|^2) <= Phi^eps(z) - Phi^eps(z*),
/// taken relative to the minimal-norm saddle z*.
#[derive(Debug, Clone, Copy)]
pub struct CurveBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl CurveBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// Evaluates the curve inequality at (z, eps) given the solved curve point
/// z_eps for that eps.
pub fn curve_bound(
    problem: &dyn SaddleProblem,
    min_norm: &SaddlePoint,
    z: &Vector,
    z_eps: &Vector,
    epsilon: f64,
) -> CurveBound {
    let z_star = min_norm.stacked();
    let dist_sq = {
        let mut d = z.clone();
        d.add_scaled(-1.0, z_eps);
        d.norm_sq()
    };
    let lhs = 0.5 * epsilon * (dist_sq + z_eps.norm_sq() - z_star.norm_sq());
    let rhs = regularized_value(problem, min_norm, z, epsilon)
        - regularized_value(problem, min_norm, &z_star, epsilon);
    CurveBound { lhs, rhs }
}
