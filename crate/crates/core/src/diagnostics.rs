//! Energy functions, parameter-assumption checks, empirical rate fits, and
//! the Lyapunov descent audit.
//!
//! Three energies track the three convergence regimes:
//!   * fast regime:   E  = t^{2q} beta(t) (gap + Tikhonov term) + inertial terms,
//!   * slow regime:   E^ = beta(t) (gap + Tikhonov term) + rescaled inertial terms,
//!   * strong regime: E~ = E^ minus the minimal-norm offset.
//!
//! The assumption checker decides each regime condition analytically for
//! power-law scalings and on a sampled grid otherwise; sampled verdicts are
//! labeled as such and are heuristic, not proofs.

use crate::dynamics::{primal_dual_gap, DynamicsError, DynamicsParams, ScalingSpec, SimState};
use crate::integrator::Trajectory;
use crate::linalg::Vector;
use crate::problem::{SaddlePoint, SaddleProblem};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("nonpositive value {value:e} at t = {t} inside the fit window")]
    NonPositiveValue { t: f64, value: f64 },
    #[error("rate fit needs at least {needed} points in the window, found {found}")]
    TooFewPoints { found: usize, needed: usize },
    #[error("invalid fit window [{0}, {1}]")]
    InvalidWindow(f64, f64),
    #[error("descent audit requires the fast-regime conditions; failing: {0}")]
    RegimeNotCertified(String),
    #[error("trajectory too short for an audit after burn-in t = {0}")]
    NothingAfterBurnIn(f64),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

// ---------------------------------------------------------------------------
// Energy functions
// ---------------------------------------------------------------------------

/// Fast-regime energy and its three components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastEnergy {
    pub total: f64,
    /// t^{2q} beta(t) (gap + (c/2t^p)(|x|^2 + |y|^2))
    pub scaled_gap: f64,
    /// inertial term in (x, vx)
    pub primal: f64,
    /// inertial term in (y, vy)
    pub dual: f64,
}

/// Slow-regime energy and its three components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowEnergy {
    pub total: f64,
    pub scaled_gap: f64,
    pub primal: f64,
    pub dual: f64,
}

/// All three energies at one state, relative to a reference saddle point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub fast: FastEnergy,
    pub slow: SlowEnergy,
    /// Strong-convergence energy; meaningful when the reference saddle is the
    /// minimal-norm one.
    pub strong: f64,
}

fn tikhonov_half_norms(state: &SimState, params: &DynamicsParams) -> f64 {
    if params.c > 0.0 {
        params.c / (2.0 * state.t.powf(params.p)) * (state.x.norm_sq() + state.y.norm_sq())
    } else {
        0.0
    }
}

pub fn energy_fast(
    state: &SimState,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
) -> Result<FastEnergy, DynamicsError> {
    let t = state.t;
    let (alpha, q) = (params.alpha, params.q);
    let beta = params.beta.beta(t);
    let gap = primal_dual_gap(problem, saddle, &state.x, &state.y)?;
    let scaled_gap = t.powf(2.0 * q) * beta * (gap + tikhonov_half_norms(state, params));

    let tq = t.powf(q);
    let coeff = (alpha - 1.0) / 2.0 * (1.0 - q * t.powf(q - 1.0));
    let inertial = |z: &Vector, z_ref: &Vector, vz: &Vector| {
        let dz = z - z_ref;
        let mut w = dz.scaled(alpha - 1.0);
        w.add_scaled(tq, vz);
        0.5 * w.norm_sq() + coeff * dz.norm_sq()
    };
    let primal = inertial(&state.x, &saddle.x, &state.vx);
    let dual = inertial(&state.y, &saddle.y, &state.vy);

    Ok(FastEnergy {
        total: scaled_gap + primal + dual,
        scaled_gap,
        primal,
        dual,
    })
}

pub fn energy_slow(
    state: &SimState,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
) -> Result<SlowEnergy, DynamicsError> {
    let t = state.t;
    let (alpha, q) = (params.alpha, params.q);
    let beta = params.beta.beta(t);
    let gap = primal_dual_gap(problem, saddle, &state.x, &state.y)?;
    let scaled_gap = beta * (gap + tikhonov_half_norms(state, params));

    let damping = (alpha - 1.0) / t.powf(q);
    let coeff = (alpha - 1.0) / 2.0 * (q / t.powf(q + 1.0) + 1.0 / t.powf(2.0 * q));
    let inertial = |z: &Vector, z_ref: &Vector, vz: &Vector| {
        let dz = z - z_ref;
        let mut w = dz.scaled(damping);
        w.add_scaled(1.0, vz);
        0.5 * w.norm_sq() + coeff * dz.norm_sq()
    };
    let primal = inertial(&state.x, &saddle.x, &state.vx);
    let dual = inertial(&state.y, &saddle.y, &state.vy);

    Ok(SlowEnergy {
        total: scaled_gap + primal + dual,
        scaled_gap,
        primal,
        dual,
    })
}

/// E~ = E^ - (c beta(t) / 2 t^p)(|x*|^2 + |y*|^2) for the minimal-norm saddle.
pub fn energy_strong(
    state: &SimState,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
    min_norm_saddle: &SaddlePoint,
) -> Result<f64, DynamicsError> {
    let slow = energy_slow(state, params, problem, min_norm_saddle)?;
    let t = state.t;
    let offset = if params.c > 0.0 {
        params.c * params.beta.beta(t) / (2.0 * t.powf(params.p))
            * (min_norm_saddle.x.norm_sq() + min_norm_saddle.y.norm_sq())
    } else {
        0.0
    };
    Ok(slow.total - offset)
}

pub fn energy_report(
    state: &SimState,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
) -> Result<EnergyReport, DynamicsError> {
    let fast = energy_fast(state, params, problem, saddle)?;
    let slow = energy_slow(state, params, problem, saddle)?;
    let strong = energy_strong(state, params, problem, saddle)?;
    Ok(EnergyReport {
        t: state.t,
        fast,
        slow,
        strong,
    })
}

// ---------------------------------------------------------------------------
// Assumption checking
// ---------------------------------------------------------------------------

/// Names of the regime conditions, by what each one controls.
pub mod condition {
    /// Scaling growth bounded by damping (fast form, margin 2q/t).
    pub const SCALING_GROWTH: &str = "scaling_growth";
    /// Regularization strong enough against the curvature term:
    /// q(1-q)/c <= t^{2-p} beta(t).
    pub const REGULARIZATION_STRENGTH: &str = "regularization_strength";
    /// Rescaled regularization decays fast: integral of t^{q-p} beta(t) finite.
    pub const FAST_DECAY_INTEGRABLE: &str = "fast_decay_integrable";
    /// Scaling growth bounded by damping with some positive margin M/t.
    pub const SCALING_GROWTH_MARGIN: &str = "scaling_growth_margin";
    /// Rescaled regularization still integrable against t^{-q}:
    /// integral of t^{-q-p} beta(t) finite.
    pub const SLOW_DECAY_INTEGRABLE: &str = "slow_decay_integrable";
    /// Regularization dominates in the limit: t^{M-p} beta(t) -> infinity for
    /// an admissible witness M.
    pub const REGULARIZATION_DOMINATES: &str = "regularization_dominates";

    pub const ALL: [&str; 6] = [
        SCALING_GROWTH,
        REGULARIZATION_STRENGTH,
        FAST_DECAY_INTEGRABLE,
        SCALING_GROWTH_MARGIN,
        SLOW_DECAY_INTEGRABLE,
        REGULARIZATION_DOMINATES,
    ];
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionVerdict {
    pub name: &'static str,
    /// Whether the condition holds from some finite time on (pointwise
    /// conditions) or outright (integral conditions).
    pub holds: bool,
    /// Earliest time from which the pointwise condition holds, clipped to t0.
    pub threshold_t: Option<f64>,
    /// True when decided on a sampling grid instead of in closed form.
    pub sampled: bool,
    pub detail: String,
}

/// Per-condition verdicts plus the regime certification they imply.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub conditions: Vec<ConditionVerdict>,
    /// Gap decays like 1/(t^{2q} beta(t)).
    pub fast: bool,
    /// beta(t)-weighted gap vanishes.
    pub slow: bool,
    /// Trajectory selects the minimal-norm saddle point.
    pub strong: bool,
    /// Witness margin M used for the slow/strong conditions.
    pub witness_m: Option<f64>,
    pub tikhonov_enabled: bool,
}

impl AssumptionReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionVerdict> {
        self.conditions.iter().find(|c| c.name == name)
    }

    fn certify(conditions: Vec<ConditionVerdict>, witness_m: Option<f64>, c: f64) -> Self {
        let holds = |name: &str| {
            conditions
                .iter()
                .find(|v| v.name == name)
                .map(|v| v.holds)
                .unwrap_or(false)
        };
        let fast = holds(condition::SCALING_GROWTH)
            && holds(condition::REGULARIZATION_STRENGTH)
            && holds(condition::FAST_DECAY_INTEGRABLE);
        let slow =
            holds(condition::SCALING_GROWTH_MARGIN) && holds(condition::SLOW_DECAY_INTEGRABLE);
        let strong = c > 0.0
            && holds(condition::REGULARIZATION_DOMINATES)
            && holds(condition::SLOW_DECAY_INTEGRABLE);
        AssumptionReport {
            conditions,
            fast,
            slow,
            strong,
            witness_m,
            tikhonov_enabled: c > 0.0,
        }
    }
}

/// Largest admissible witness margin M = q (1 + 1/(2 alpha - 1)).
pub fn witness_margin(params: &DynamicsParams) -> f64 {
    params.q * (1.0 + 1.0 / (2.0 * params.alpha - 1.0))
}

/// Checks every regime condition; closed-form for power-law scalings,
/// grid-sampled otherwise.
pub fn check_assumptions(params: &DynamicsParams) -> Result<AssumptionReport, DynamicsError> {
    params.validate()?;
    match params.beta {
        ScalingSpec::PowerLaw { r } => Ok(check_power_law(params, r)),
        ScalingSpec::Custom { .. } => check_sampled(params, 1e6),
    }
}

/// Forces the sampled code path (usable on power laws for cross-validation).
pub fn check_assumptions_sampled(
    params: &DynamicsParams,
    t_check: f64,
) -> Result<AssumptionReport, DynamicsError> {
    params.validate()?;
    check_sampled(params, t_check)
}

fn check_power_law(params: &DynamicsParams, r: f64) -> AssumptionReport {
    let (alpha, q, p, c, t0) = (params.alpha, params.q, params.p, params.c, params.t0);
    let m_witness = witness_margin(params);
    let mut conditions = Vec::new();

    // beta_dot/beta = r/t <= (alpha-1)/t^q - 2q/t  <=>  t^{1-q} >= (r+2q)/(alpha-1)
    let thr1 = ((r + 2.0 * q) / (alpha - 1.0)).powf(1.0 / (1.0 - q));
    conditions.push(ConditionVerdict {
        name: condition::SCALING_GROWTH,
        holds: true,
        threshold_t: Some(thr1.max(t0)),
        sampled: false,
        detail: format!("holds for t >= {:.6} (closed form)", thr1.max(t0)),
    });

    // q(1-q)/c <= t^{2-p+r}
    conditions.push(if c > 0.0 {
        let bound = q * (1.0 - q) / c;
        let expo = 2.0 - p + r;
        if expo > 0.0 {
            let thr = bound.powf(1.0 / expo).max(t0);
            ConditionVerdict {
                name: condition::REGULARIZATION_STRENGTH,
                holds: true,
                threshold_t: Some(thr),
                sampled: false,
                detail: format!("{:.6} <= t^{:.3} from t >= {:.6}", bound, expo, thr),
            }
        } else if expo == 0.0 {
            let holds = bound <= 1.0;
            ConditionVerdict {
                name: condition::REGULARIZATION_STRENGTH,
                holds,
                threshold_t: holds.then_some(t0),
                sampled: false,
                detail: format!("flat exponent: requires {:.6} <= 1", bound),
            }
        } else {
            ConditionVerdict {
                name: condition::REGULARIZATION_STRENGTH,
                holds: false,
                threshold_t: None,
                sampled: false,
                detail: format!(
                    "t^{:.3} decays below the bound {:.6}; fails for large t",
                    expo, bound
                ),
            }
        }
    } else {
        vacuous(condition::REGULARIZATION_STRENGTH)
    });

    // integral of t^{q-p+r} converges iff exponent < -1
    let fast_expo = q - p + r;
    conditions.push(ConditionVerdict {
        name: condition::FAST_DECAY_INTEGRABLE,
        holds: fast_expo < -1.0,
        threshold_t: None,
        sampled: false,
        detail: format!("integrand exponent q-p+r = {:.6} (needs < -1)", fast_expo),
    });

    // r/t <= (alpha-1)/t^q - M/t with M = witness margin
    let thr_m = ((r + m_witness) / (alpha - 1.0)).powf(1.0 / (1.0 - q));
    conditions.push(ConditionVerdict {
        name: condition::SCALING_GROWTH_MARGIN,
        holds: true,
        threshold_t: Some(thr_m.max(t0)),
        sampled: false,
        detail: format!(
            "holds for t >= {:.6} with margin M = {:.6}",
            thr_m.max(t0),
            m_witness
        ),
    });

    // integral of t^{-q-p+r} converges iff exponent < -1
    let slow_expo = -q - p + r;
    conditions.push(ConditionVerdict {
        name: condition::SLOW_DECAY_INTEGRABLE,
        holds: slow_expo < -1.0,
        threshold_t: None,
        sampled: false,
        detail: format!("integrand exponent -q-p+r = {:.6} (needs < -1)", slow_expo),
    });

    // t^{M-p+r} -> infinity for some M in (0, witness]: possible iff p - r < witness
    conditions.push(if c > 0.0 {
        let holds = p - r < m_witness;
        ConditionVerdict {
            name: condition::REGULARIZATION_DOMINATES,
            holds,
            threshold_t: None,
            sampled: false,
            detail: format!(
                "p - r = {:.6} vs admissible margin {:.6}; witness M = {:.6} gives limit exponent {:.6}",
                p - r,
                m_witness,
                m_witness,
                m_witness - p + r
            ),
        }
    } else {
        vacuous(condition::REGULARIZATION_DOMINATES)
    });

    AssumptionReport::certify(conditions, Some(m_witness), c)
}

fn vacuous(name: &'static str) -> ConditionVerdict {
    ConditionVerdict {
        name,
        holds: false,
        threshold_t: None,
        sampled: false,
        detail: "vacuous: c = 0 disables the Tikhonov term".into(),
    }
}

fn check_sampled(params: &DynamicsParams, t_check: f64) -> Result<AssumptionReport, DynamicsError> {
    let (alpha, q, p, c, t0) = (params.alpha, params.q, params.p, params.c, params.t0);
    let m_witness = witness_margin(params);
    let grid = log_grid(t0, t_check.max(t0 * 10.0), 512);
    for &t in &grid {
        let b = params.beta.beta(t);
        if !(b > 0.0) || !b.is_finite() {
            return Err(DynamicsError::InvalidParams(format!(
                "beta({}) = {} is not positive finite",
                t, b
            )));
        }
    }

    let mut conditions = Vec::new();

    let growth = |t: f64| {
        params.beta.beta_dot(t) / params.beta.beta(t) <= (alpha - 1.0) / t.powf(q) - 2.0 * q / t
    };
    conditions.push(sampled_pointwise(condition::SCALING_GROWTH, &grid, growth));

    conditions.push(if c > 0.0 {
        let strength = |t: f64| q * (1.0 - q) / c <= t.powf(2.0 - p) * params.beta.beta(t);
        sampled_pointwise(condition::REGULARIZATION_STRENGTH, &grid, strength)
    } else {
        vacuous(condition::REGULARIZATION_STRENGTH)
    });

    conditions.push(sampled_integral(
        condition::FAST_DECAY_INTEGRABLE,
        &grid,
        |t| t.powf(q - p) * params.beta.beta(t),
    ));

    let margin = |t: f64| {
        params.beta.beta_dot(t) / params.beta.beta(t) <= (alpha - 1.0) / t.powf(q) - m_witness / t
    };
    conditions.push(sampled_pointwise(
        condition::SCALING_GROWTH_MARGIN,
        &grid,
        margin,
    ));

    conditions.push(sampled_integral(
        condition::SLOW_DECAY_INTEGRABLE,
        &grid,
        |t| t.powf(-q - p) * params.beta.beta(t),
    ));

    conditions.push(if c > 0.0 {
        // tail slope of log(t^{M-p} beta(t)) must be positive for divergence
        let slope = tail_log_slope(&grid, |t| t.powf(m_witness - p) * params.beta.beta(t));
        ConditionVerdict {
            name: condition::REGULARIZATION_DOMINATES,
            holds: slope > 1e-9,
            threshold_t: None,
            sampled: true,
            detail: format!(
                "sampled, not proven: tail log-slope {:.6} with witness M = {:.6}",
                slope, m_witness
            ),
        }
    } else {
        vacuous(condition::REGULARIZATION_DOMINATES)
    });

    Ok(AssumptionReport::certify(conditions, Some(m_witness), c))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn sampled_pointwise<F: Fn(f64) -> bool>(
    name: &'static str,
    grid: &[f64],
    cond: F,
) -> ConditionVerdict {
    let mut last_failure: Option<usize> = None;
    for (i, &t) in grid.iter().enumerate() {
        if !cond(t) {
            last_failure = Some(i);
        }
    }
    match last_failure {
        None => ConditionVerdict {
            name,
            holds: true,
            threshold_t: Some(grid[0]),
            sampled: true,
            detail: "sampled, not proven: holds on the whole grid".into(),
        },
        Some(i) if i + 1 < grid.len() => ConditionVerdict {
            name,
            holds: true,
            threshold_t: Some(grid[i + 1]),
            sampled: true,
            detail: format!("sampled, not proven: holds from t ~ {:.6} on", grid[i + 1]),
        },
        Some(_) => ConditionVerdict {
            name,
            holds: false,
            threshold_t: None,
            sampled: true,
            detail: "sampled, not proven: still failing at the grid end".into(),
        },
    }
}

fn sampled_integral<F: Fn(f64) -> f64>(
    name: &'static str,
    grid: &[f64],
    integrand: F,
) -> ConditionVerdict {
    let slope = tail_log_slope(grid, &integrand);
    let partial = adaptive_simpson(&integrand, grid[0], *grid.last().unwrap(), 1e-10, 30);
    ConditionVerdict {
        name,
        holds: slope < -1.0 - 1e-9,
        threshold_t: None,
        sampled: true,
        detail: format!(
            "sampled, not proven: tail exponent {:.6} (needs < -1), partial integral {:.6e}",
            slope, partial
        ),
    }
}

/// Least-squares slope of log phi vs log t over the grid tail [T/2, T].
fn tail_log_slope<F: Fn(f64) -> f64>(grid: &[f64], phi: F) -> f64 {
    let t_hi = *grid.last().unwrap();
    let mut pts: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&t| t >= t_hi / 2.0)
        .map(|&t| (t.ln(), phi(t).max(f64::MIN_POSITIVE).ln()))
        .collect();
    if pts.len() < 8 {
        pts = grid
            .iter()
            .rev()
            .take(8)
            .map(|&t| (t.ln(), phi(t).max(f64::MIN_POSITIVE).ln()))
            .collect();
    }
    least_squares_slope(&pts).0
}

fn least_squares_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pts {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, mean_y - slope * mean_x)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    rec(f, a, b, simpson(f, a, b), tol, depth)
}

// ---------------------------------------------------------------------------
// Rate fitting
// ---------------------------------------------------------------------------

/// Least-squares power-law fit on (log t, log value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub window: (f64, f64),
    /// Fitted exponent of t.
    pub slope: f64,
    /// Intercept in log-log coordinates.
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 10;

pub fn fit_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit, DiagnosticsError> {
    let (t_a, t_b) = window;
    if !(t_a < t_b) {
        return Err(DiagnosticsError::InvalidWindow(t_a, t_b));
    }
    let mut pts = Vec::new();
    for &(t, v) in series {
        if t < t_a || t > t_b {
            continue;
        }
        if !(v > 0.0) {
            return Err(DiagnosticsError::NonPositiveValue { t, value: v });
        }
        pts.push((t.ln(), v.ln()));
    }
    if pts.len() < MIN_FIT_POINTS {
        return Err(DiagnosticsError::TooFewPoints {
            found: pts.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let (slope, intercept) = least_squares_slope(&pts);
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(RateFit {
        window,
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

/// Floors a series at `floor` (for gap underflow ahead of log fits) and
/// reports how many entries were clipped.
pub fn floor_series(series: &[(f64, f64)], floor: f64) -> (Vec<(f64, f64)>, usize) {
    let mut clipped = 0usize;
    let out = series
        .iter()
        .map(|&(t, v)| {
            if v < floor {
                clipped += 1;
                (t, floor)
            } else {
                (t, v)
            }
        })
        .collect();
    (out, clipped)
}

/// Double-precision floor applied to gap series before log fits.
pub const GAP_FLOOR: f64 = 1e-16;

// ---------------------------------------------------------------------------
// Lyapunov descent audit
// ---------------------------------------------------------------------------

/// Result of checking fast-regime energy descent sample-to-sample.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovAudit {
    /// First time from which every pointwise fast-regime condition holds.
    pub burn_in: f64,
    pub samples_checked: usize,
    /// max over consecutive samples of E_{k+1} - E_k - source integral.
    pub max_violation: f64,
    pub worst_t: Option<f64>,
    /// Whether every step satisfied the descent bound within the slacks.
    pub certified: bool,
}

/// Default per-step slack covering integrator noise; a real descent
/// violation grows with t and is not masked by it.
pub const DESCENT_REL_SLACK: f64 = 1e-9;
pub const DESCENT_ABS_SLACK: f64 = 1e-9;

/// Certifies numerically that the fast-regime energy descends along the
/// trajectory, up to the source term carrying |x*|^2 + |y*|^2 (bounded via a
/// trapezoidal integral of its closed-form density).
pub fn lyapunov_audit(
    traj: &Trajectory,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
    saddle: &SaddlePoint,
    rel_slack: f64,
    abs_slack: f64,
) -> Result<LyapunovAudit, DiagnosticsError> {
    let report = check_assumptions(params)?;
    if !report.fast {
        let failing: Vec<&str> = report
            .conditions
            .iter()
            .filter(|v| !v.holds)
            .map(|v| v.name)
            .collect();
        return Err(DiagnosticsError::RegimeNotCertified(failing.join(", ")));
    }
    let burn_in = descent_burn_in(params, &report);

    let saddle_norm_sq = saddle.x.norm_sq() + saddle.y.norm_sq();
    let source_density = |t: f64| {
        (params.alpha - 1.0) * params.c / 2.0
            * t.powf(params.q - params.p)
            * params.beta.beta(t)
            * saddle_norm_sq
    };

    let tail: Vec<&SimState> = traj.samples.iter().filter(|s| s.t >= burn_in).collect();
    if tail.len() < 2 {
        return Err(DiagnosticsError::NothingAfterBurnIn(burn_in));
    }

    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_t = None;
    let mut certified = true;
    let mut prev_energy = energy_fast(tail[0], params, problem, saddle)?.total;
    for pair in tail.windows(2) {
        let (s0, s1) = (pair[0], pair[1]);
        let e1 = energy_fast(s1, params, problem, saddle)?.total;
        let source = 0.5 * (s1.t - s0.t) * (source_density(s0.t) + source_density(s1.t));
        let violation = e1 - prev_energy - source;
        if violation > max_violation {
            max_violation = violation;
            worst_t = Some(s1.t);
        }
        if violation > rel_slack * prev_energy.abs() + abs_slack {
            certified = false;
        }
        prev_energy = e1;
    }

    Ok(LyapunovAudit {
        burn_in,
        samples_checked: tail.len(),
        max_violation,
        worst_t,
        certified,
    })
}

/// max of t0, the time from which q t^{q-1} <= 1, and the thresholds of the
/// pointwise fast-regime conditions.
pub fn descent_burn_in(params: &DynamicsParams, report: &AssumptionReport) -> f64 {
    let t1 = params.q.powf(1.0 / (1.0 - params.q));
    let mut burn = params.t0.max(t1);
    for name in [
        condition::SCALING_GROWTH,
        condition::REGULARIZATION_STRENGTH,
    ] {
        if let Some(v) = report.condition(name) {
            if let Some(t) = v.threshold_t {
                burn = burn.max(t);
            }
        }
    }
    burn
}
