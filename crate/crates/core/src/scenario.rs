//! Replayable experiment scenarios.
//!
//! A [`Scenario`] is a TOML-serializable description of one run: which
//! problem (by registry name or a regression config), the dynamics
//! parameters, the initial state, the integrator settings, and which
//! diagnostic series to record. Running one produces a [`ScenarioResult`]
//! whose series are aligned to the trajectory sample times and which embeds
//! the assumption report for its parameters, so every plotted curve is tagged
//! with the regime its parameters certify.
//!
//! The built-in presets reproduce the three experiment designs: the
//! p-sweep, the regularized-vs-unregularized trajectory comparison, and the
//! regression study over (q, beta, c, condition number).

use crate::diagnostics::{
    self, check_assumptions, energy_report, AssumptionReport, RateFit, GAP_FLOOR,
};
use crate::dynamics::{primal_dual_gap, DynamicsError, DynamicsParams, ScalingSpec, SimState};
use crate::integrator::{
    integrate_with_monitor, IntegrateError, IntegratorConfig, SampleSpacing, Trajectory,
};
use crate::linalg::Vector;
use crate::problem::{
    builtin, builtin_names, ProblemError, RegressionConfig, SaddlePoint, SaddleProblem,
    SmoothedL1Regression,
};
use crate::rng::SeededRng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario validation error: {0}")]
    Validation(String),
    #[error("unknown builtin problem {0:?} (available: {1})")]
    UnknownProblem(String, String),
    #[error("unknown series {0:?}")]
    UnknownSeries(String),
    #[error("series {0:?} needs a known minimal-norm saddle point, which problem {1:?} does not provide")]
    SeriesNeedsSaddle(String, String),
    #[error("series {0:?} needs a primal objective, which problem {1:?} does not provide")]
    SeriesNeedsObjective(String, String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

// ---------------------------------------------------------------------------
// Scenario description (the file format)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemRef {
    #[serde(rename = "builtin")]
    Builtin(String),
    #[serde(rename = "regression")]
    Regression(RegressionConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSpec {
    /// Power-law exponent of the time scaling.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsSpec {
    pub alpha: f64,
    pub q: f64,
    pub p: f64,
    pub c: f64,
    pub t0: f64,
    pub beta: BetaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub t_end: f64,
    pub sample_count: usize,
    /// "log" or "linear".
    pub spacing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub series: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub problem: ProblemRef,
    pub params: ParamsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    pub integrator: IntegratorSpec,
    pub outputs: OutputSpec,
}

/// Series names accepted in `outputs.series` (and used as CSV columns).
pub mod series {
    pub const GAP: &str = "gap";
    pub const TRAJ_ERROR: &str = "traj_error";
    pub const VEL_NORM: &str = "vel_norm";
    pub const ENERGY_FAST: &str = "E";
    pub const ENERGY_SLOW: &str = "E_hat";
    pub const ENERGY_STRONG: &str = "E_tilde";
    pub const PHI: &str = "phi";
    pub const DIST_MIN_NORM: &str = "dist_min_norm";

    pub const ALL: [&str; 8] = [
        GAP,
        TRAJ_ERROR,
        VEL_NORM,
        ENERGY_FAST,
        ENERGY_SLOW,
        ENERGY_STRONG,
        PHI,
        DIST_MIN_NORM,
    ];

    /// Series that are defined relative to a reference saddle point.
    pub fn needs_saddle(name: &str) -> bool {
        matches!(
            name,
            GAP | TRAJ_ERROR | ENERGY_FAST | ENERGY_SLOW | ENERGY_STRONG | DIST_MIN_NORM
        )
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialization")
    }

    pub fn dynamics_params(&self) -> Result<DynamicsParams, ScenarioError> {
        let params = DynamicsParams {
            alpha: self.params.alpha,
            q: self.params.q,
            p: self.params.p,
            c: self.params.c,
            beta: ScalingSpec::power_law(self.params.beta.r),
            t0: self.params.t0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig, ScenarioError> {
        let spacing = match self.integrator.spacing.as_str() {
            "log" => SampleSpacing::Log,
            "linear" => SampleSpacing::Linear,
            other => {
                return Err(ScenarioError::Validation(format!(
                    "integrator.spacing must be \"log\" or \"linear\", got {:?}",
                    other
                )))
            }
        };
        let cfg = IntegratorConfig {
            rel_tol: self.integrator.rel_tol,
            abs_tol: self.integrator.abs_tol,
            h_init: self.integrator.h_init,
            h_min: self.integrator.h_min,
            h_max: self.integrator.h_max,
            t_end: self.integrator.t_end,
            sample_count: self.integrator.sample_count,
            spacing,
        };
        cfg.validate(self.params.t0)?;
        Ok(cfg)
    }

    pub fn build_problem(&self) -> Result<Box<dyn SaddleProblem>, ScenarioError> {
        match &self.problem {
            ProblemRef::Builtin(name) => builtin(name).ok_or_else(|| {
                ScenarioError::UnknownProblem(name.clone(), builtin_names().join(", "))
            }),
            ProblemRef::Regression(cfg) => Ok(Box::new(SmoothedL1Regression::generate(cfg)?)),
        }
    }

    /// Initial state; defaults to the origin at rest when unspecified.
    pub fn initial_state(&self, problem: &dyn SaddleProblem) -> Result<SimState, ScenarioError> {
        let n = problem.primal_dim();
        let m = problem.dual_dim();
        match &self.initial {
            None => Ok(SimState::at_rest(
                self.params.t0,
                Vector::zeros(n),
                Vector::zeros(m),
            )),
            Some(init) => {
                if init.x.len() != n
                    || init.vx.len() != n
                    || init.y.len() != m
                    || init.vy.len() != m
                {
                    return Err(ScenarioError::Validation(format!(
                        "initial state dims do not match problem ({}x{})",
                        n, m
                    )));
                }
                Ok(SimState::new(
                    self.params.t0,
                    Vector::from_vec(init.x.clone()),
                    Vector::from_vec(init.y.clone()),
                    Vector::from_vec(init.vx.clone()),
                    Vector::from_vec(init.vy.clone()),
                ))
            }
        }
    }

    fn validate_outputs(&self, problem: &dyn SaddleProblem) -> Result<(), ScenarioError> {
        for name in &self.outputs.series {
            if !series::ALL.contains(&name.as_str()) {
                return Err(ScenarioError::UnknownSeries(name.clone()));
            }
            if series::needs_saddle(name) && problem.known_min_norm_saddle().is_none() {
                return Err(ScenarioError::SeriesNeedsSaddle(
                    name.clone(),
                    problem.name().to_string(),
                ));
            }
            if name == series::PHI
                && problem
                    .primal_objective(&Vector::zeros(problem.primal_dim()))
                    .is_none()
            {
                return Err(ScenarioError::SeriesNeedsObjective(
                    name.clone(),
                    problem.name().to_string(),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Running scenarios
// ---------------------------------------------------------------------------

/// Named columns aligned to the trajectory sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn pairs(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        self.column(name)
            .map(|col| self.t.iter().copied().zip(col.iter().copied()).collect())
    }

    /// Value of `name` at the first sample with t >= `t_mark`.
    pub fn value_at(&self, name: &str, t_mark: f64) -> Option<(f64, f64)> {
        let col = self.column(name)?;
        self.t
            .iter()
            .position(|&t| t >= t_mark)
            .map(|i| (self.t[i], col[i]))
    }
}

#[derive(Debug, Clone)]
pub struct NamedRateFit {
    pub series: String,
    pub fit: RateFit,
    /// How many values were floored before the log-log fit.
    pub floored: usize,
}

pub struct ScenarioResult {
    pub scenario: Scenario,
    pub problem: Box<dyn SaddleProblem>,
    pub params: DynamicsParams,
    pub trajectory: Trajectory,
    pub series: SeriesTable,
    pub rate_fits: Vec<NamedRateFit>,
    pub assumptions: AssumptionReport,
}

impl std::fmt::Debug for ScenarioResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioResult")
            .field("scenario", &self.scenario.name)
            .field("problem", &self.problem.name())
            .field("samples", &self.trajectory.samples.len())
            .field("series", &self.series.names)
            .finish()
    }
}

/// Evaluates the requested series at one state (used per-sample while
/// integrating; the same function recomputes them post-hoc from a stored
/// trajectory).
pub fn evaluate_series(
    names: &[String],
    state: &SimState,
    params: &DynamicsParams,
    problem: &dyn SaddleProblem,
    saddle: Option<&SaddlePoint>,
) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(names.len());
    // compute the energy report once if any energy column is requested
    let wants_energy = names.iter().any(|n| {
        matches!(
            n.as_str(),
            series::ENERGY_FAST | series::ENERGY_SLOW | series::ENERGY_STRONG
        )
    });
    let energies = if wants_energy {
        let s = saddle.ok_or("energy series need a reference saddle")?;
        Some(energy_report(state, params, problem, s).map_err(|e| e.to_string())?)
    } else {
        None
    };
    for name in names {
        let v = match name.as_str() {
            series::GAP => {
                let s = saddle.ok_or("gap needs a reference saddle")?;
                primal_dual_gap(problem, s, &state.x, &state.y).map_err(|e| e.to_string())?
            }
            series::TRAJ_ERROR => {
                let s = saddle.ok_or("traj_error needs a reference saddle")?;
                (&state.x - &s.x).norm() + (&state.y - &s.y).norm()
            }
            series::VEL_NORM => state.vx.norm() + state.vy.norm(),
            series::ENERGY_FAST => energies.as_ref().unwrap().fast.total,
            series::ENERGY_SLOW => energies.as_ref().unwrap().slow.total,
            series::ENERGY_STRONG => energies.as_ref().unwrap().strong,
            series::PHI => problem
                .primal_objective(&state.x)
                .ok_or("phi needs a primal objective")?,
            series::DIST_MIN_NORM => {
                let s = saddle.ok_or("dist_min_norm needs a reference saddle")?;
                ((&state.x - &s.x).norm_sq() + (&state.y - &s.y).norm_sq()).sqrt()
            }
            other => return Err(format!("unknown series {:?}", other)),
        };
        out.push(v);
    }
    Ok(out)
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult, ScenarioError> {
    let problem = scenario.build_problem()?;
    scenario.validate_outputs(problem.as_ref())?;
    let params = scenario.dynamics_params()?;
    let cfg = scenario.integrator_config()?;
    let state0 = scenario.initial_state(problem.as_ref())?;
    let saddle = problem.known_min_norm_saddle();
    let names = scenario.outputs.series.clone();

    let mut t = Vec::with_capacity(cfg.sample_count);
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.sample_count); names.len()];
    let trajectory = integrate_with_monitor(&state0, &params, problem.as_ref(), &cfg, |state| {
        let values = evaluate_series(&names, state, &params, problem.as_ref(), saddle.as_ref())?;
        t.push(state.t);
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
        Ok(())
    })?;

    let series_table = SeriesTable {
        names: names.clone(),
        t,
        columns,
    };

    // power-law fit of each positive series over the last decade
    let mut rate_fits = Vec::new();
    let window = (cfg.t_end / 10.0, cfg.t_end);
    for name in &names {
        if let Some(pairs) = series_table.pairs(name) {
            let (floored, clipped) = diagnostics::floor_series(&pairs, GAP_FLOOR);
            if let Ok(fit) = diagnostics::fit_rate(&floored, window) {
                rate_fits.push(NamedRateFit {
                    series: name.clone(),
                    fit,
                    floored: clipped,
                });
            }
        }
    }

    let assumptions = check_assumptions(&params)?;

    Ok(ScenarioResult {
        scenario: scenario.clone(),
        problem,
        params,
        trajectory,
        series: series_table,
        rate_fits,
        assumptions,
    })
}

/// Runs scenarios on a bounded worker pool, preserving order.
pub fn run_all(
    scenarios: Vec<Scenario>,
    workers: usize,
) -> Vec<Result<ScenarioResult, ScenarioError>> {
    let workers = workers.max(1).min(scenarios.len().max(1));
    if workers == 1 {
        return scenarios.iter().map(run_scenario).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ScenarioResult, ScenarioError>>>> =
        Mutex::new((0..scenarios.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= scenarios.len() {
                    break;
                }
                let result = run_scenario(&scenarios[i]);
                results.lock().expect("poisoned")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

fn example1_initial() -> InitialSpec {
    InitialSpec {
        x: vec![1.0, 1.5],
        y: vec![1.0, 1.5],
        vx: vec![1.0, 1.0],
        vy: vec![1.0, 1.0],
    }
}

fn example1_params(p: f64, c: f64) -> ParamsSpec {
    ParamsSpec {
        alpha: 3.0,
        q: 0.8,
        p,
        c,
        t0: 1.0,
        beta: BetaSpec { r: 0.5 },
    }
}

fn integrator_spec(t_end: f64, sample_count: usize, rel_tol: f64, abs_tol: f64) -> IntegratorSpec {
    IntegratorSpec {
        rel_tol,
        abs_tol,
        h_init: 1e-4,
        h_min: 1e-13,
        h_max: f64::INFINITY,
        t_end,
        sample_count,
        spacing: "log".into(),
    }
}

pub const SWEEP_P_VALUES: [f64; 4] = [0.8, 1.0, 1.2, 1.4];

/// p-sweep on the exponential-bilinear problem over [1, 200].
pub fn sweep_scenario(p: f64) -> Scenario {
    Scenario {
        name: format!("sweep-p{}", p),
        problem: ProblemRef::Builtin("example1".into()),
        params: example1_params(p, 1.0),
        initial: Some(example1_initial()),
        integrator: integrator_spec(200.0, 300, 1e-8, 1e-10),
        outputs: OutputSpec {
            series: vec![
                series::GAP.into(),
                series::TRAJ_ERROR.into(),
                series::VEL_NORM.into(),
            ],
        },
    }
}

/// Trajectory comparison over [1, 20]: `regularized` selects c = 1, else c = 0.
pub fn compare_scenario(regularized: bool) -> Scenario {
    let c = if regularized { 1.0 } else { 0.0 };
    let tag = if regularized {
        "regularized"
    } else {
        "unregularized"
    };
    Scenario {
        name: format!("compare-{}", tag),
        problem: ProblemRef::Builtin("example1".into()),
        params: example1_params(0.8, c),
        initial: Some(example1_initial()),
        integrator: integrator_spec(20.0, 200, 1e-8, 1e-10),
        outputs: OutputSpec {
            series: vec![
                series::GAP.into(),
                series::TRAJ_ERROR.into(),
                series::VEL_NORM.into(),
                series::DIST_MIN_NORM.into(),
            ],
        },
    }
}

/// One regression-study case: a (q, r) damping/scaling pair at a target
/// condition number and size, run with and without regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionCase {
    pub label: String,
    pub q: f64,
    pub r: f64,
    pub kappa: f64,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

pub const REGRESSION_QR_CASES: [(f64, f64); 3] = [(0.2, 0.1), (0.4, 0.2), (0.6, 0.3)];
pub const REGRESSION_KAPPAS: [f64; 2] = [10.0, 200.0];
pub const REGRESSION_C: f64 = 10.0;

/// The gated study grid: three (q, r) cases at each condition number.
pub fn regression_cases(m: usize, n: usize, kappas: &[f64], base_seed: u64) -> Vec<RegressionCase> {
    let mut cases = Vec::new();
    for (ci, &(q, r)) in REGRESSION_QR_CASES.iter().enumerate() {
        for (ki, &kappa) in kappas.iter().enumerate() {
            cases.push(RegressionCase {
                label: format!("case{}-k{}", ci + 1, kappa),
                q,
                r,
                kappa,
                m,
                n,
                seed: base_seed + (ci * 16 + ki) as u64,
            });
        }
    }
    cases
}

/// Scale of the seeded standard-normal initial primal point.
///
/// The study compares objective decay mid-transient, so the start must sit
/// well outside the solution set; from the origin the vanishing
/// regularization has nothing to accelerate and only biases the limit.
pub const REGRESSION_START_SCALE: f64 = 10.0;
const REGRESSION_START_SALT: u64 = 0xABCDEF;

/// Scenario for one case at the given Tikhonov coefficient; both `c` values
/// of a case share the same problem seed (same instance) and the same
/// seeded far-out initial point.
pub fn regression_scenario(case: &RegressionCase, c: f64) -> Scenario {
    let mut rng = SeededRng::new(case.seed ^ REGRESSION_START_SALT);
    let x0: Vec<f64> = (0..case.n)
        .map(|_| REGRESSION_START_SCALE * rng.normal())
        .collect();
    Scenario {
        name: format!("regression-{}-c{}", case.label, c),
        problem: ProblemRef::Regression(RegressionConfig {
            m: case.m,
            n: case.n,
            lambda: 0.1,
            a: 100.0,
            kappa: case.kappa,
            sigma_max: 1.0,
            seed: case.seed,
        }),
        params: ParamsSpec {
            alpha: 6.0,
            q: case.q,
            p: 2.0,
            c,
            t0: 1.0,
            beta: BetaSpec { r: case.r },
        },
        initial: Some(InitialSpec {
            x: x0,
            y: vec![0.0; case.m],
            vx: vec![0.0; case.n],
            vy: vec![0.0; case.m],
        }),
        integrator: integrator_spec(50.0, 200, 1e-6, 1e-9),
        outputs: OutputSpec {
            series: vec![series::PHI.into(), series::VEL_NORM.into()],
        },
    }
}

pub struct RegressionPair {
    pub case: RegressionCase,
    pub regularized: ScenarioResult,
    pub unregularized: ScenarioResult,
}

impl RegressionPair {
    pub fn phi_final(&self, regularized: bool) -> f64 {
        let result = if regularized {
            &self.regularized
        } else {
            &self.unregularized
        };
        *result
            .series
            .column(series::PHI)
            .expect("phi is always recorded")
            .last()
            .expect("nonempty series")
    }
}

/// Runs every case with c = REGRESSION_C and c = 0 on `workers` threads.
pub fn regression_study(
    cases: &[RegressionCase],
    workers: usize,
) -> Result<Vec<RegressionPair>, ScenarioError> {
    let mut scenarios = Vec::with_capacity(cases.len() * 2);
    for case in cases {
        scenarios.push(regression_scenario(case, REGRESSION_C));
        scenarios.push(regression_scenario(case, 0.0));
    }
    let mut results = run_all(scenarios, workers).into_iter();
    let mut pairs = Vec::with_capacity(cases.len());
    for case in cases {
        let regularized = results.next().expect("one result per scenario")?;
        let unregularized = results.next().expect("one result per scenario")?;
        pairs.push(RegressionPair {
            case: case.clone(),
            regularized,
            unregularized,
        });
    }
    Ok(pairs)
}

/// Runs the p-sweep preset ([1, 200], one run per p).
pub fn p_sweep(workers: usize) -> Result<Vec<ScenarioResult>, ScenarioError> {
    let scenarios = SWEEP_P_VALUES.iter().map(|&p| sweep_scenario(p)).collect();
    run_all(scenarios, workers).into_iter().collect()
}

/// Runs the trajectory comparison preset (c = 1 vs c = 0 on [1, 20]).
pub fn trajectory_compare() -> Result<(ScenarioResult, ScenarioResult), ScenarioError> {
    let with = run_scenario(&compare_scenario(true))?;
    let without = run_scenario(&compare_scenario(false))?;
    Ok((with, without))
}

/// Every named preset shipped with the tool.
pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = SWEEP_P_VALUES
        .iter()
        .map(|&p| sweep_scenario(p).name)
        .collect();
    names.push(compare_scenario(true).name);
    names.push(compare_scenario(false).name);
    for case in regression_cases(100, 200, &REGRESSION_KAPPAS, DEFAULT_REGRESSION_SEED) {
        names.push(regression_scenario(&case, REGRESSION_C).name);
        names.push(regression_scenario(&case, 0.0).name);
    }
    names
}

pub const DEFAULT_REGRESSION_SEED: u64 = 7001;

pub fn preset(name: &str) -> Option<Scenario> {
    for p in SWEEP_P_VALUES {
        let s = sweep_scenario(p);
        if s.name == name {
            return Some(s);
        }
    }
    for regularized in [true, false] {
        let s = compare_scenario(regularized);
        if s.name == name {
            return Some(s);
        }
    }
    for case in regression_cases(100, 200, &REGRESSION_KAPPAS, DEFAULT_REGRESSION_SEED) {
        for c in [REGRESSION_C, 0.0] {
            let s = regression_scenario(&case, c);
            if s.name == name {
                return Some(s);
            }
        }
    }
    None
}
