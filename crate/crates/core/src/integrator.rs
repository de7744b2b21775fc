//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! [`solve_ode`] is the generic embedded-pair core (FSAL, elementary step
//! controller with safety 0.9 and growth clamp [0.2, 5]); [`integrate`] and
//! [`integrate_with_monitor`] wrap it for the phase-space system. Output
//! states land on a requested sample grid via the standard 4th-order
//! continuous extension, so trajectories are deterministic functions of
//! their inputs.

use crate::dynamics::{rhs_flat, DynamicsError, DynamicsParams, RhsBuffers, SimState};
use crate::problem::SaddleProblem;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("invalid integrator config: {0}")]
    Config(String),
    #[error("step size underflow at t = {t} (err = {err}); last good state retained")]
    StepUnderflow {
        t: f64,
        err: f64,
        last_state: Vec<f64>,
    },
    #[error("non-finite right-hand side at t = {t}")]
    NonFiniteRhs { t: f64 },
    #[error("monitor failed at t = {t}: {message}")]
    Monitor { t: f64, message: String },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSpacing {
    /// Log-spaced sample times (the default; rate plots are log-log).
    Log,
    Linear,
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub t_end: f64,
    pub sample_count: usize,
    pub spacing: SampleSpacing,
}

impl IntegratorConfig {
    /// rel 1e-8 / abs 1e-10, log-spaced samples.
    pub fn default_to(t_end: f64) -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            h_init: 1e-4,
            h_min: 1e-13,
            h_max: f64::INFINITY,
            t_end,
            sample_count: 200,
            spacing: SampleSpacing::Log,
        }
    }

    pub fn validate(&self, t0: f64) -> Result<(), IntegrateError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(IntegrateError::Config(format!(
                "tolerances must be positive, got rel={}, abs={}",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(IntegrateError::Config(format!(
                "need 0 < h_min <= h_init <= h_max, got {} / {} / {}",
                self.h_min, self.h_init, self.h_max
            )));
        }
        if !(self.t_end > t0) {
            return Err(IntegrateError::Config(format!(
                "t_end = {} must exceed t0 = {}",
                self.t_end, t0
            )));
        }
        if self.sample_count < 2 {
            return Err(IntegrateError::Config(
                "sample_count must be at least 2".into(),
            ));
        }
        if self.spacing == SampleSpacing::Log && !(t0 > 0.0) {
            return Err(IntegrateError::Config("log spacing requires t0 > 0".into()));
        }
        Ok(())
    }

    /// The output grid: first time exactly t0, last exactly t_end.
    pub fn sample_times(&self, t0: f64) -> Result<Vec<f64>, IntegrateError> {
        self.validate(t0)?;
        let n = self.sample_count;
        let mut times = Vec::with_capacity(n);
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let t = match self.spacing {
                SampleSpacing::Log => (t0.ln() + s * (self.t_end.ln() - t0.ln())).exp(),
                SampleSpacing::Linear => t0 + s * (self.t_end - t0),
            };
            times.push(t);
        }
        times[0] = t0;
        times[n - 1] = self.t_end;
        Ok(times)
    }
}

/// Solution curve sampled on the output grid, with step statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<SimState>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
}

impl Trajectory {
    pub fn first(&self) -> &SimState {
        self.samples.first().expect("trajectory is never empty")
    }

    pub fn last(&self) -> &SimState {
        self.samples.last().expect("trajectory is never empty")
    }
}

/// Raw solution of a generic first-order system.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// 4th-order continuous-extension weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const SHRINK_FLOOR: f64 = 0.2;
const GROWTH_CAP: f64 = 5.0;

struct DenseStep {
    cont: [Vec<f64>; 5],
    t: f64,
    h: f64,
}

impl DenseStep {
    fn eval(&self, t_out: f64, out: &mut [f64]) {
        let theta = (t_out - self.t) / self.h;
        let s1 = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + s1 * (self.cont[2][i]
                            + theta * (self.cont[3][i] + s1 * self.cont[4][i])));
        }
    }
}

/// Integrates dy/dt = f(t, y) from t0 to the last entry of `sample_times`,
/// emitting dense-output states at every requested time.
///
/// `sample_times` must be strictly increasing and start exactly at t0.
pub fn solve_ode<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    sample_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<RawSolution, IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), IntegrateError>,
{
    if sample_times.len() < 2 || sample_times[0] != t0 {
        return Err(IntegrateError::Config(
            "sample grid must start at t0 and hold at least two times".into(),
        ));
    }
    if sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IntegrateError::Config(
            "sample grid must be strictly increasing".into(),
        ));
    }
    let t_end = *sample_times.last().expect("nonempty");
    let dim = y0.len();

    let mut eval =
        |t: f64, y: &[f64], dy: &mut [f64], evals: &mut usize| -> Result<(), IntegrateError> {
            *evals += 1;
            f(t, y, dy)?;
            if dy.iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::NonFiniteRhs { t });
            }
            Ok(())
        };

    let mut rhs_evals = 0usize;
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    eval(t, &y, &mut k[0], &mut rhs_evals)?;

    let mut states: Vec<Vec<f64>> = Vec::with_capacity(sample_times.len());
    states.push(y.clone());
    let mut next_sample = 1usize;

    let mut h = cfg.h_init.min(t_end - t0);
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    while t < t_end {
        h = h.clamp(cfg.h_min, cfg.h_max).min(t_end - t);

        // six derivative evaluations; k[0] is carried over (FSAL)
        for stage in 0..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage + 1) {
                    acc += A[stage][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            if stage == 5 {
                // the last combination is the 5th-order solution itself
                y_new.copy_from_slice(&y_stage);
            }
            eval(
                t + C[stage] * h,
                &y_stage,
                &mut k[stage + 1],
                &mut rhs_evals,
            )?;
        }

        // scaled RMS error of the embedded difference
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            let t_new = t + h;
            accepted += 1;

            // continuous extension over [t, t+h]
            let mut cont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; dim]);
            for i in 0..dim {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                let mut dsum = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    dsum += D[j] * kj[i];
                }
                cont[4][i] = h * dsum;
            }
            let dense = DenseStep { cont, t, h };
            while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                let mut out = vec![0.0; dim];
                dense.eval(sample_times[next_sample], &mut out);
                states.push(out);
                next_sample += 1;
            }

            t = t_new;
            y.copy_from_slice(&y_new);
            k.swap(0, 6); // FSAL
        } else {
            rejected += 1;
            if h <= cfg.h_min {
                return Err(IntegrateError::StepUnderflow {
                    t,
                    err,
                    last_state: y,
                });
            }
        }

        let factor = (SAFETY * err.powf(-0.2)).clamp(SHRINK_FLOOR, GROWTH_CAP);
        h *= factor;
    }

    debug_assert_eq!(states.len(), sample_times.len());
    Ok(RawSolution {
        times: sample_times.to_vec(),
        states,
        accepted_steps: accepted,
        rejected_steps: rejected,
        rhs_evals,
    })
}

/// Integrates the phase-space system from `state0` (whose time must equal
/// `params.t0`) to `cfg.t_end`.
pub fn integrate(
    state0: &SimState,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    integrate_with_monitor(state0, params, problem, cfg, |_| Ok(()))
}

/// As [`integrate`], invoking `monitor` at every emitted sample.
///
/// The monitor sees each sample read-only; returning an error aborts the
/// integration with context.
pub fn integrate_with_monitor<M>(
    state0: &SimState,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
    cfg: &IntegratorConfig,
    mut monitor: M,
) -> Result<Trajectory, IntegrateError>
where
    M: FnMut(&SimState) -> Result<(), String>,
{
    params.validate()?;
    if state0.t != params.t0 {
        return Err(IntegrateError::Config(format!(
            "initial state at t = {} but params.t0 = {}",
            state0.t, params.t0
        )));
    }
    if !state0.is_finite() {
        return Err(IntegrateError::Config("initial state is not finite".into()));
    }
    let n = problem.primal_dim();
    let m = problem.dual_dim();
    if state0.x.dim() != n || state0.y.dim() != m || state0.vx.dim() != n || state0.vy.dim() != m {
        return Err(IntegrateError::Config(format!(
            "state dims do not match problem ({}x{})",
            n, m
        )));
    }

    let sample_times = cfg.sample_times(params.t0)?;
    let y0 = state0.to_flat();

    let mut buf = RhsBuffers::new(n, m);
    let raw = solve_ode(
        |t, flat, out| {
            rhs_flat(t, flat, out, &mut buf, params, problem)?;
            Ok(())
        },
        params.t0,
        &y0,
        &sample_times,
        cfg,
    )?;

    let mut samples = Vec::with_capacity(raw.times.len());
    for (t, flat) in raw.times.iter().zip(&raw.states) {
        let state = SimState::from_flat(*t, flat, n, m);
        monitor(&state).map_err(|message| IntegrateError::Monitor { t: *t, message })?;
        samples.push(state);
    }

    Ok(Trajectory {
        samples,
        accepted_steps: raw.accepted_steps,
        rejected_steps: raw.rejected_steps,
        rhs_evals: raw.rhs_evals,
    })
}
