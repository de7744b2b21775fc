//! The second-order inertial primal-dual system as a first-order ODE on
//! phase space (x, y, vx, vy), plus the Lagrangian, primal-dual gap and KKT
//! residual used to measure progress.
//!
//! The system applies slow damping alpha/t^q, a time scaling beta(t) on the
//! gradient terms, cross-extrapolation by t^q/(alpha-1), and vanishing
//! Tikhonov terms (c/t^p)*x and (c/t^p)*y. c = 0 turns regularization off.

use crate::linalg::Vector;
use crate::problem::{SaddlePoint, SaddleProblem};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid dynamics parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite value in {context} at t = {t}")]
    NonFinite { context: &'static str, t: f64 },
    #[error("primal-dual gap {gap:e} below -{tol:e}: reference point is not a saddle")]
    NegativeGap { gap: f64, tol: f64 },
}

/// Time scaling beta(t): positive, continuously differentiable, nondecreasing.
#[derive(Clone)]
pub enum ScalingSpec {
    /// beta(t) = t^r with r > 0.
    PowerLaw { r: f64 },
    /// Caller-supplied beta and its derivative; positivity/monotonicity is
    /// only spot-checked on a grid, and assumption verdicts for it are
    /// labeled as sampled.
    Custom {
        beta: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        beta_dot: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl ScalingSpec {
    pub fn power_law(r: f64) -> Self {
        ScalingSpec::PowerLaw { r }
    }

    pub fn beta(&self, t: f64) -> f64 {
        match self {
            ScalingSpec::PowerLaw { r } => t.powf(*r),
            ScalingSpec::Custom { beta, .. } => beta(t),
        }
    }

    pub fn beta_dot(&self, t: f64) -> f64 {
        match self {
            ScalingSpec::PowerLaw { r } => r * t.powf(r - 1.0),
            ScalingSpec::Custom { beta_dot, .. } => beta_dot(t),
        }
    }

    pub fn is_power_law(&self) -> bool {
        matches!(self, ScalingSpec::PowerLaw { .. })
    }

    /// Grid check of beta > 0 and beta nondecreasing on [t_lo, t_hi].
    pub fn validate_on(&self, t_lo: f64, t_hi: f64) -> Result<(), DynamicsError> {
        match self {
            ScalingSpec::PowerLaw { r } => {
                if !(*r > 0.0) {
                    return Err(DynamicsError::InvalidParams(format!(
                        "power-law exponent r must be > 0, got {}",
                        r
                    )));
                }
                Ok(())
            }
            ScalingSpec::Custom { .. } => {
                let n = 64;
                let mut prev = f64::NEG_INFINITY;
                for i in 0..=n {
                    let t = t_lo + (t_hi - t_lo) * i as f64 / n as f64;
                    let b = self.beta(t);
                    if !(b > 0.0) || !b.is_finite() {
                        return Err(DynamicsError::InvalidParams(format!(
                            "custom beta({}) = {} is not positive finite",
                            t, b
                        )));
                    }
                    if b < prev * (1.0 - 1e-12) {
                        return Err(DynamicsError::InvalidParams(format!(
                            "custom beta decreases near t = {}",
                            t
                        )));
                    }
                    prev = b;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for ScalingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingSpec::PowerLaw { r } => write!(f, "PowerLaw{{r: {}}}", r),
            ScalingSpec::Custom { .. } => write!(f, "Custom{{..}}"),
        }
    }
}

/// The tuple (alpha, q, p, c, beta, t0) parameterizing the system.
#[derive(Debug, Clone)]
pub struct DynamicsParams {
    /// Damping strength, > 1.
    pub alpha: f64,
    /// Damping exponent, in (0, 1).
    pub q: f64,
    /// Tikhonov decay exponent, > 0.
    pub p: f64,
    /// Tikhonov coefficient, >= 0 (0 disables regularization).
    pub c: f64,
    pub beta: ScalingSpec,
    /// Start time, > 0 (keeps t^{-q} regular).
    pub t0: f64,
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.alpha > 1.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "alpha must be > 1, got {}",
                self.alpha
            )));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "q must satisfy 0 < q < 1, got {}",
                self.q
            )));
        }
        if !(self.p > 0.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "p must be > 0, got {}",
                self.p
            )));
        }
        if !(self.c >= 0.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "c must be >= 0, got {}",
                self.c
            )));
        }
        if !(self.t0 > 0.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "t0 must be > 0, got {}",
                self.t0
            )));
        }
        self.beta.validate_on(self.t0, self.t0.max(1.0) * 100.0)
    }
}

/// Phase-space state at time t. Serialization order is (x, y, vx, vy).
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: Vector,
    pub y: Vector,
    pub vx: Vector,
    pub vy: Vector,
}

impl SimState {
    pub fn new(t: f64, x: Vector, y: Vector, vx: Vector, vy: Vector) -> Self {
        SimState { t, x, y, vx, vy }
    }

    pub fn at_rest(t: f64, x: Vector, y: Vector) -> Self {
        let (n, m) = (x.dim(), y.dim());
        SimState {
            t,
            x,
            y,
            vx: Vector::zeros(n),
            vy: Vector::zeros(m),
        }
    }

    pub fn phase_dim(&self) -> usize {
        2 * (self.x.dim() + self.y.dim())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.phase_dim());
        out.extend_from_slice(self.x.as_slice());
        out.extend_from_slice(self.y.as_slice());
        out.extend_from_slice(self.vx.as_slice());
        out.extend_from_slice(self.vy.as_slice());
        out
    }

    pub fn from_flat(t: f64, flat: &[f64], n: usize, m: usize) -> Self {
        debug_assert_eq!(flat.len(), 2 * (n + m));
        SimState {
            t,
            x: Vector::from_vec(flat[..n].to_vec()),
            y: Vector::from_vec(flat[n..n + m].to_vec()),
            vx: Vector::from_vec(flat[n + m..2 * n + m].to_vec()),
            vy: Vector::from_vec(flat[2 * n + m..].to_vec()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.vx.is_finite() && self.vy.is_finite()
    }
}

/// Time derivative of the phase vector.
#[derive(Debug, Clone)]
pub struct PhaseDerivative {
    pub dx: Vector,
    pub dy: Vector,
    pub dvx: Vector,
    pub dvy: Vector,
}

/// Reusable working storage for flat-phase derivative evaluation; keeps the
/// integrator's hot loop free of per-call allocations.
pub struct RhsBuffers {
    n: usize,
    m: usize,
    x: Vector,
    y: Vector,
    x_ext: Vector,
    y_ext: Vector,
}

impl RhsBuffers {
    pub fn new(n: usize, m: usize) -> Self {
        RhsBuffers {
            n,
            m,
            x: Vector::zeros(n),
            y: Vector::zeros(m),
            x_ext: Vector::zeros(n),
            y_ext: Vector::zeros(m),
        }
    }
}

/// Derivative of the flat phase vector (x, y, vx, vy) written into `out`:
///
///   dx  = vx
///   dy  = vy
///   dvx = -(alpha/t^q) vx - beta(t) [grad_f(x) + K^T(y + e(t) vy) + (c/t^p) x]
///   dvy = -(alpha/t^q) vy + beta(t) [K(x + e(t) vx) - grad_g(y) - (c/t^p) y]
///
/// with extrapolation weight e(t) = t^q/(alpha-1).
pub fn rhs_flat(
    t: f64,
    flat: &[f64],
    out: &mut [f64],
    buf: &mut RhsBuffers,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
) -> Result<(), DynamicsError> {
    if !(t > 0.0) {
        return Err(DynamicsError::InvalidParams(format!(
            "rhs needs t > 0, got {}",
            t
        )));
    }
    let (n, m) = (buf.n, buf.m);
    debug_assert_eq!(flat.len(), 2 * (n + m));
    let (x, rest) = flat.split_at(n);
    let (y, rest) = rest.split_at(m);
    let (vx, vy) = rest.split_at(n);

    let tq = t.powf(params.q);
    let damping = params.alpha / tq;
    let beta = params.beta.beta(t);
    let extrap = tq / (params.alpha - 1.0);
    let tikhonov = if params.c > 0.0 {
        params.c / t.powf(params.p)
    } else {
        0.0
    };

    out[..n].copy_from_slice(vx);
    out[n..n + m].copy_from_slice(vy);

    buf.x.as_mut_slice().copy_from_slice(x);
    buf.y.as_mut_slice().copy_from_slice(y);
    for i in 0..n {
        buf.x_ext[i] = x[i] + extrap * vx[i];
    }
    for j in 0..m {
        buf.y_ext[j] = y[j] + extrap * vy[j];
    }

    let k = problem.coupling();
    if k.rows() != m || k.cols() != n {
        return Err(DynamicsError::InvalidParams("coupling/state dims".into()));
    }

    // x-block: gradient of L(., y + e*vy) plus the Tikhonov term.
    let grad_f = problem.grad_f(&buf.x);
    let kty = k.apply_transpose(&buf.y_ext).expect("dims checked");
    let (dvx, dvy) = out[n + m..].split_at_mut(n);
    for i in 0..n {
        let force = grad_f[i] + kty[i] + tikhonov * x[i];
        dvx[i] = -damping * vx[i] - beta * force;
    }

    // y-block: gradient of L(x + e*vx, .) minus the Tikhonov term.
    let grad_g = problem.grad_g(&buf.y);
    let kx = k.apply(&buf.x_ext).expect("dims checked");
    for j in 0..m {
        let force = kx[j] - grad_g[j] - tikhonov * y[j];
        dvy[j] = -damping * vy[j] + beta * force;
    }

    if out.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFinite { context: "rhs", t });
    }
    Ok(())
}

/// As [`rhs_flat`], on a structured state.
pub fn rhs(
    state: &SimState,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
) -> Result<PhaseDerivative, DynamicsError> {
    let (n, m) = (state.x.dim(), state.y.dim());
    let flat = state.to_flat();
    let mut out = vec![0.0; flat.len()];
    let mut buf = RhsBuffers::new(n, m);
    rhs_flat(state.t, &flat, &mut out, &mut buf, params, problem)?;
    let d = SimState::from_flat(state.t, &out, n, m);
    Ok(PhaseDerivative {
        dx: d.x,
        dy: d.y,
        dvx: d.vx,
        dvy: d.vy,
    })
}

/// L(x, y) = f(x) + <Kx, y> - g(y).
pub fn lagrangian(problem: &dyn SaddleProblem, x: &Vector, y: &Vector) -> f64 {
    let kx = problem.coupling().apply(x).expect("dimension-checked");
    problem.f(x) + kx.dot(y) - problem.g(y)
}

/// Tolerance below which a computed gap is treated as a saddle-input error.
pub const GAP_TOLERANCE: f64 = 1e-12;

/// L(x, y*) - L(x*, y); nonnegative whenever (x*, y*) is a saddle point.
pub fn primal_dual_gap(
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
    x: &Vector,
    y: &Vector,
) -> Result<f64, DynamicsError> {
    let gap = lagrangian(problem, x, &saddle.y) - lagrangian(problem, &saddle.x, y);
    if gap < -GAP_TOLERANCE {
        return Err(DynamicsError::NegativeGap {
            gap,
            tol: GAP_TOLERANCE,
        });
    }
    Ok(gap)
}

/// ||grad_f(x) + K^T y|| + ||grad_g(y) - Kx||; zero exactly on the saddle set.
pub fn kkt_residual(problem: &dyn SaddleProblem, x: &Vector, y: &Vector) -> f64 {
    let k = problem.coupling();
    let mut rx = problem.grad_f(x);
    rx.add_scaled(1.0, &k.apply_transpose(y).expect("dimension-checked"));
    let mut ry = problem.grad_g(y);
    ry.add_scaled(-1.0, &k.apply(x).expect("dimension-checked"));
    rx.norm() + ry.norm()
}
