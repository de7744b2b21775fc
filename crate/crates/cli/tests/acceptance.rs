//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line
//! with the measured values (run with `--nocapture` to see them).
//!
//! Expensive trajectories are integrated once and shared across criteria.

use saddleflow_core::diagnostics::{
    check_assumptions, check_assumptions_sampled, condition, energy_fast, energy_slow, fit_rate,
    floor_series, lyapunov_audit, GAP_FLOOR,
};
use saddleflow_core::dynamics::{primal_dual_gap, DynamicsParams, ScalingSpec, SimState};
use saddleflow_core::integrator::{integrate, IntegratorConfig, SampleSpacing, Trajectory};
use saddleflow_core::linalg::Vector;
use saddleflow_core::problem::{
    builtin, RegressionConfig, SaddlePoint, SaddleProblem, ShiftedQuadratic, SmoothedL1Regression,
};
use saddleflow_core::rng::SeededRng;
use saddleflow_core::scenario::{
    compare_scenario, regression_cases, regression_study, run_scenario, series, RegressionPair,
    DEFAULT_REGRESSION_SEED, REGRESSION_KAPPAS,
};
use saddleflow_core::tikhonov::{
    curve_bound, default_epsilon_schedule, min_norm_solution, solve_regularized,
};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

struct Check {
    label: String,
    pass: bool,
}

fn check(label: String, pass: bool) -> Check {
    Check { label, pass }
}

fn criterion(name: &str, checks: Vec<Check>) {
    let pass = checks.iter().all(|c| c.pass);
    println!("[{}] {}", if pass { "PASS" } else { "FAIL" }, name);
    for c in &checks {
        println!("    [{}] {}", if c.pass { "ok" } else { "FAILED" }, c.label);
    }
    assert!(pass, "criterion failed: {}", name);
}

fn bench_initial() -> SimState {
    SimState::new(
        1.0,
        Vector::from_vec(vec![1.0, 1.5]),
        Vector::from_vec(vec![1.0, 1.5]),
        Vector::from_vec(vec![1.0, 1.0]),
        Vector::from_vec(vec![1.0, 1.0]),
    )
}

fn example1_params(p: f64, c: f64) -> DynamicsParams {
    DynamicsParams {
        alpha: 3.0,
        q: 0.8,
        p,
        c,
        beta: ScalingSpec::power_law(0.5),
        t0: 1.0,
    }
}

fn long_run_config() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-8,
        abs_tol: 1e-10,
        h_init: 1e-4,
        h_min: 1e-13,
        h_max: f64::INFINITY,
        t_end: 500.0,
        sample_count: 400,
        spacing: SampleSpacing::Log,
    }
}

/// Fast-regime run (p = 2.5) on [1, 500], shared by three criteria.
fn fast_run() -> &'static (Trajectory, Duration) {
    static RUN: OnceLock<(Trajectory, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let problem = builtin("example1").unwrap();
        let start = Instant::now();
        let traj = integrate(
            &bench_initial(),
            &example1_params(2.5, 1.0),
            problem.as_ref(),
            &long_run_config(),
        )
        .expect("fast-regime integration");
        (traj, start.elapsed())
    })
}

/// Slow-regime run (p = 0.8) on [1, 500].
fn slow_run() -> &'static (Trajectory, Duration) {
    static RUN: OnceLock<(Trajectory, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let problem = builtin("example1").unwrap();
        let start = Instant::now();
        let traj = integrate(
            &bench_initial(),
            &example1_params(0.8, 1.0),
            problem.as_ref(),
            &long_run_config(),
        )
        .expect("slow-regime integration");
        (traj, start.elapsed())
    })
}

fn regression_pairs() -> &'static (Vec<RegressionPair>, Duration) {
    static RUN: OnceLock<(Vec<RegressionPair>, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let cases = regression_cases(100, 200, &REGRESSION_KAPPAS, DEFAULT_REGRESSION_SEED);
        let start = Instant::now();
        let pairs = regression_study(&cases, 4).expect("regression study");
        (pairs, start.elapsed())
    })
}

fn gap_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    let problem = builtin("example1").unwrap();
    let saddle = SaddlePoint::origin(2, 2);
    traj.samples
        .iter()
        .map(|s| {
            (
                s.t,
                primal_dual_gap(problem.as_ref(), &saddle, &s.x, &s.y).unwrap(),
            )
        })
        .collect()
}

fn value_at(series: &[(f64, f64)], t_mark: f64) -> (f64, f64) {
    *series
        .iter()
        .find(|&&(t, _)| t >= t_mark)
        .expect("mark inside the sampled range")
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn c01_regularized_trajectory_reaches_the_minimal_norm_point() {
    let start = Instant::now();
    let result = run_scenario(&compare_scenario(true)).unwrap();
    let elapsed = start.elapsed();
    let last = result.trajectory.last();
    let final_norm = (last.x.norm_sq() + last.y.norm_sq()).sqrt();
    let initial = bench_initial();
    let initial_norm = (initial.x.norm_sq() + initial.y.norm_sq()).sqrt();
    criterion(
        "regularized trajectory on [1,20] converges to the minimal-norm point",
        vec![
            check(
                format!("final |(x, y)| = {:.6} <= 0.1", final_norm),
                final_norm <= 0.1,
            ),
            check(
                format!(
                    "distance ratio {:.6} <= 0.25 of initial {:.4}",
                    final_norm / initial_norm,
                    initial_norm
                ),
                final_norm <= 0.25 * initial_norm,
            ),
            check(
                format!("runtime {:.2?} < 5 s", elapsed),
                elapsed < Duration::from_secs(5),
            ),
        ],
    );
}

#[test]
fn c02_unregularized_trajectory_selects_a_non_minimal_saddle() {
    let start = Instant::now();
    let result = run_scenario(&compare_scenario(false)).unwrap();
    let elapsed = start.elapsed();
    let last = result.trajectory.last();
    let endpoint = [last.x[0], last.x[1], last.y[0], last.y[1]];
    let target = [-0.25, 0.25, -0.25, 0.25];
    let dist_to_target: f64 = endpoint
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    // distance to the affine set {x1 + x2 = 0, y1 + y2 = 0}
    let affine_dist =
        (((last.x[0] + last.x[1]).powi(2) + (last.y[0] + last.y[1]).powi(2)) / 2.0).sqrt();
    let final_norm = (last.x.norm_sq() + last.y.norm_sq()).sqrt();
    criterion(
        "unregularized trajectory on [1,20] converges inside the saddle set but away from the origin",
        vec![
            check(
                format!("|endpoint - (-0.25, 0.25, -0.25, 0.25)| = {:.6} <= 0.15", dist_to_target),
                dist_to_target <= 0.15,
            ),
            check(
                format!("distance to the solution set = {:.6} <= 0.05", affine_dist),
                affine_dist <= 0.05,
            ),
            check(
                format!("final norm {:.6} >= 0.35", final_norm),
                final_norm >= 0.35,
            ),
            check(
                format!("runtime {:.2?} < 5 s", elapsed),
                elapsed < Duration::from_secs(5),
            ),
        ],
    );
}

#[test]
fn c03_fast_regime_gap_rate() {
    let (traj, elapsed) = fast_run();
    let gap = gap_series(traj);
    let (floored, _) = floor_series(&gap, GAP_FLOOR);
    let fit = fit_rate(&floored, (50.0, 500.0)).unwrap();

    // boundedness surrogate: gap * t^{2q} beta(t) with q = 0.8, r = 0.5
    let scaled: Vec<(f64, f64)> = gap
        .iter()
        .map(|&(t, g)| (t, g * t.powf(1.6) * t.powf(0.5)))
        .collect();
    let (_, at_50) = value_at(&scaled, 50.0);
    let sup = scaled
        .iter()
        .filter(|&&(t, _)| t >= 50.0)
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);

    criterion(
        "fast-regime gap decays at the certified power-law rate on [1,500]",
        vec![
            check(
                format!("fitted log-log slope {:.4} <= -1.8 on [50, 500]", fit.slope),
                fit.slope <= -1.8,
            ),
            check(
                format!(
                    "sup of scaled gap over [50,500] = {:.3e} <= 10x its value {:.3e} at t = 50",
                    sup, at_50
                ),
                sup <= 10.0 * at_50,
            ),
            check(
                format!("runtime {:.2?} < 30 s", elapsed),
                *elapsed < Duration::from_secs(30),
            ),
        ],
    );
}

#[test]
fn c04_energy_descent_with_negative_control() {
    let (traj, _) = fast_run();
    let problem = builtin("example1").unwrap();
    let saddle = SaddlePoint::origin(2, 2);
    let params = example1_params(2.5, 1.0);

    let audit = lyapunov_audit(traj, &params, problem.as_ref(), &saddle, 1e-9, 1e-9).unwrap();

    // negative control: flip velocities where the flip provably raises the
    // energy above the previous sample
    let mut corrupted = traj.clone();
    let half = corrupted.samples.len() / 2;
    let mut best: Option<(usize, f64)> = None;
    for k in half..corrupted.samples.len() {
        let mut flipped = corrupted.samples[k].clone();
        flipped.vx = flipped.vx.scaled(-1.0);
        flipped.vy = flipped.vy.scaled(-1.0);
        let e_flipped = energy_fast(&flipped, &params, problem.as_ref(), &saddle)
            .unwrap()
            .total;
        let e_prev = energy_fast(
            &corrupted.samples[k - 1],
            &params,
            problem.as_ref(),
            &saddle,
        )
        .unwrap()
        .total;
        let violation = e_flipped - e_prev;
        if best.map_or(true, |(_, v)| violation > v) {
            best = Some((k, violation));
        }
    }
    let (k, planted) = best.unwrap();
    corrupted.samples[k].vx = corrupted.samples[k].vx.scaled(-1.0);
    corrupted.samples[k].vy = corrupted.samples[k].vy.scaled(-1.0);
    let control =
        lyapunov_audit(&corrupted, &params, problem.as_ref(), &saddle, 1e-9, 1e-9).unwrap();

    criterion(
        "energy nonincreasing after burn-in (origin saddle), corrupted control detected",
        vec![
            check(
                format!(
                    "descent certified within 1e-9 relative slack (max violation {:.3e} at t = {:?})",
                    audit.max_violation, audit.worst_t
                ),
                audit.certified,
            ),
            check(
                format!(
                    "velocity-flip corruption (planted jump {:.3e} at sample {}) fails the audit",
                    planted, k
                ),
                !control.certified,
            ),
        ],
    );
}

#[test]
fn c05_slow_regime_energy_vanishes() {
    let (traj, elapsed) = slow_run();
    let problem = builtin("example1").unwrap();
    let saddle = SaddlePoint::origin(2, 2);
    let params = example1_params(0.8, 1.0);

    let e_first = energy_slow(traj.first(), &params, problem.as_ref(), &saddle)
        .unwrap()
        .total;
    let e_last = energy_slow(traj.last(), &params, problem.as_ref(), &saddle)
        .unwrap()
        .total;

    let weighted_gap: Vec<(f64, f64)> = gap_series(traj)
        .iter()
        .map(|&(t, g)| (t, t.powf(0.5) * g))
        .collect();
    let (_, at_5) = value_at(&weighted_gap, 5.0);
    let at_end = weighted_gap.last().unwrap().1;

    criterion(
        "slow-regime energy and scaled gap vanish on [1,500]",
        vec![
            check(
                format!(
                    "slow energy at 500 = {:.3e} <= 0.05 x its initial value {:.3e}",
                    e_last, e_first
                ),
                e_last <= 0.05 * e_first,
            ),
            check(
                format!(
                    "beta-weighted gap at 500 = {:.3e} <= 0.05 x its value {:.3e} at t = 5",
                    at_end, at_5
                ),
                at_end <= 0.05 * at_5,
            ),
            check(
                format!("runtime {:.2?} < 30 s", elapsed),
                *elapsed < Duration::from_secs(30),
            ),
        ],
    );
}

#[test]
fn c06_velocity_decays_at_the_damping_rate() {
    let (traj, _) = fast_run();
    let weighted: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| (s.t, (s.vx.norm() + s.vy.norm()) * s.t.powf(0.8)))
        .collect();
    let (_, at_125) = value_at(&weighted, 125.0);
    let tail_max = weighted
        .iter()
        .filter(|&&(t, _)| t >= 125.0)
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    criterion(
        "velocity norm scaled by t^q stays bounded over the tail [125,500]",
        vec![check(
            format!(
                "tail max {:.4e} <= 3 x value {:.4e} at t = 125",
                tail_max, at_125
            ),
            tail_max <= 3.0 * at_125,
        )],
    );
}

#[test]
fn c07_approximation_curve_properties() {
    let mut checks = Vec::new();

    // full schedule with warm starts on both closed-form problems
    let cases: Vec<(Box<dyn SaddleProblem>, Vector)> = vec![
        (builtin("example1").unwrap(), Vector::zeros(4)),
        (
            builtin("shifted-quadratic").unwrap(),
            ShiftedQuadratic::default_probe()
                .known_min_norm_saddle()
                .unwrap()
                .stacked(),
        ),
    ];
    for (problem, analytic) in &cases {
        let reference = problem.known_min_norm_saddle().unwrap();
        let limit_norm = analytic.norm();
        let mut z = Vector::zeros(analytic.dim());
        let mut worst_excess = f64::NEG_INFINITY;
        for &eps in &default_epsilon_schedule() {
            let point = solve_regularized(problem.as_ref(), &reference, eps, &z, 1e-10).unwrap();
            worst_excess = worst_excess.max(point.z.norm() - limit_norm);
            z = point.z;
        }
        checks.push(check(
            format!(
                "{}: curve norms exceed the minimal norm by at most {:.2e} (<= 1e-9)",
                problem.name(),
                worst_excess
            ),
            worst_excess <= 1e-9,
        ));

        let sol =
            min_norm_solution(problem.as_ref(), &reference, &default_epsilon_schedule()).unwrap();
        let err = {
            let mut d = sol.z.clone();
            d.add_scaled(-1.0, analytic);
            d.norm()
        };
        checks.push(check(
            format!(
                "{}: curve limit within {:.2e} of the analytic minimal-norm point (<= 1e-6)",
                problem.name(),
                err
            ),
            err <= 1e-6,
        ));
    }

    // randomized curve-inequality probes
    let problem = builtin("example1").unwrap();
    let min_norm = SaddlePoint::origin(2, 2);
    let mut rng = SeededRng::new(0xACCE);
    let mut violations = 0usize;
    let mut probes = 0usize;
    for &eps in &[1.0, 0.1, 0.01] {
        let z_eps = solve_regularized(problem.as_ref(), &min_norm, eps, &Vector::zeros(4), 1e-11)
            .unwrap()
            .z;
        for _ in 0..100 {
            let z = Vector::from_vec((0..4).map(|_| rng.normal()).collect());
            probes += 1;
            if !curve_bound(problem.as_ref(), &min_norm, &z, &z_eps, eps).holds(1e-10) {
                violations += 1;
            }
        }
    }
    checks.push(check(
        format!(
            "curve inequality: {} violations in {} randomized probes",
            violations, probes
        ),
        violations == 0 && probes == 300,
    ));

    criterion(
        "approximation-curve norm bound, limit, and inequality",
        checks,
    );
}

#[test]
fn c08_assumption_checker_truth_table() {
    struct Expected {
        label: &'static str,
        params: DynamicsParams,
        fast: bool,
        slow: bool,
        strong: bool,
    }
    let table = vec![
        Expected {
            label: "alpha=3 q=0.8 p=2.5 c=1 r=0.5",
            params: example1_params(2.5, 1.0),
            fast: true,
            slow: true,
            strong: false,
        },
        Expected {
            label: "alpha=3 q=0.8 p=0.8 c=1 r=0.5",
            params: example1_params(0.8, 1.0),
            fast: false,
            slow: true,
            strong: true,
        },
        Expected {
            label: "alpha=3 q=0.8 p=0.8 c=0 r=0.5",
            params: example1_params(0.8, 0.0),
            fast: false,
            slow: true,
            strong: false,
        },
        Expected {
            label: "alpha=6 q=0.2 p=2 c=10 r=0.1",
            params: regression_params(0.2, 0.1),
            fast: true,
            slow: true,
            strong: false,
        },
        Expected {
            label: "alpha=6 q=0.4 p=2 c=10 r=0.2",
            params: regression_params(0.4, 0.2),
            fast: true,
            slow: true,
            strong: false,
        },
        Expected {
            label: "alpha=6 q=0.6 p=2 c=10 r=0.3",
            params: regression_params(0.6, 0.3),
            fast: true,
            slow: true,
            strong: false,
        },
    ];

    let mut checks = Vec::new();
    for row in &table {
        let analytic = check_assumptions(&row.params).unwrap();
        let regime_ok =
            analytic.fast == row.fast && analytic.slow == row.slow && analytic.strong == row.strong;
        checks.push(check(
            format!(
                "{}: regimes (fast={}, slow={}, strong={}) match the closed-form power-law arithmetic",
                row.label, analytic.fast, analytic.slow, analytic.strong
            ),
            regime_ok,
        ));

        let sampled = check_assumptions_sampled(&row.params, 1e6).unwrap();
        let mut agree = sampled.fast == analytic.fast
            && sampled.slow == analytic.slow
            && sampled.strong == analytic.strong;
        for name in condition::ALL {
            let a = analytic.condition(name).map(|v| v.holds);
            let s = sampled.condition(name).map(|v| v.holds);
            agree &= a == s;
        }
        checks.push(check(
            format!(
                "{}: sampled code path agrees condition-by-condition",
                row.label
            ),
            agree,
        ));
    }
    criterion(
        "assumption checker matches the closed-form truth table",
        checks,
    );
}

fn regression_params(q: f64, r: f64) -> DynamicsParams {
    DynamicsParams {
        alpha: 6.0,
        q,
        p: 2.0,
        c: 10.0,
        beta: ScalingSpec::power_law(r),
        t0: 1.0,
    }
}

#[test]
fn c09_gradient_and_transcription_oracles() {
    let mut checks = Vec::new();

    // gradients against central finite differences
    let regression = SmoothedL1Regression::generate(&RegressionConfig {
        m: 8,
        n: 12,
        lambda: 0.1,
        a: 100.0,
        kappa: 10.0,
        sigma_max: 1.0,
        seed: 17,
    })
    .unwrap();
    let problems: Vec<Box<dyn SaddleProblem>> = vec![
        builtin("example1").unwrap(),
        builtin("shifted-quadratic").unwrap(),
        Box::new(regression),
    ];
    for problem in &problems {
        let p = problem.as_ref();
        let scale = if p.name() == "example1" { 0.5 } else { 1.0 };
        let mut worst: f64 = 0.0;
        let mut rng = SeededRng::new(0x9A0 + p.primal_dim() as u64);
        for _ in 0..100 {
            let x = Vector::from_vec((0..p.primal_dim()).map(|_| scale * rng.normal()).collect());
            worst = worst.max(gradient_mismatch(|v| p.f(v), |v| p.grad_f(v), &x));
            let y = Vector::from_vec((0..p.dual_dim()).map(|_| scale * rng.normal()).collect());
            worst = worst.max(gradient_mismatch(|v| p.g(v), |v| p.grad_g(v), &y));
        }
        checks.push(check(
            format!(
                "{}: worst relative finite-difference mismatch {:.2e} <= 1e-6 over 100 probes",
                p.name(),
                worst
            ),
            worst <= 1e-6,
        ));
    }

    // independent transcription of the three energies
    let problem = builtin("example1").unwrap();
    let saddle = SaddlePoint::origin(2, 2);
    let mut rng = SeededRng::new(0x0E0E);
    let mut worst: f64 = 0.0;
    let mut states = 0usize;
    for &(p, c) in &[(2.5, 1.0), (0.8, 1.0), (0.8, 0.0), (2.0, 10.0)] {
        let prm = example1_params(p, c);
        for k in 0..25 {
            let t = 1.0 + k as f64 * 0.43 + rng.uniform();
            let state = SimState::new(
                t,
                Vector::from_vec((0..2).map(|_| 0.5 * rng.normal()).collect()),
                Vector::from_vec((0..2).map(|_| 0.5 * rng.normal()).collect()),
                Vector::from_vec((0..2).map(|_| 0.5 * rng.normal()).collect()),
                Vector::from_vec((0..2).map(|_| 0.5 * rng.normal()).collect()),
            );
            let (f1, s1, g1) = transcribed_energies(&state, &prm, problem.as_ref(), &saddle);
            let f0 = energy_fast(&state, &prm, problem.as_ref(), &saddle)
                .unwrap()
                .total;
            let s0 = energy_slow(&state, &prm, problem.as_ref(), &saddle)
                .unwrap()
                .total;
            let g0 = saddleflow_core::diagnostics::energy_strong(
                &state,
                &prm,
                problem.as_ref(),
                &saddle,
            )
            .unwrap();
            for (a, b) in [(f0, f1), (s0, s1), (g0, g1)] {
                worst = worst.max((a - b).abs() / (1.0 + a.abs().max(b.abs())));
            }
            states += 1;
        }
    }
    checks.push(check(
        format!(
            "energy transcriptions agree to {:.2e} (<= 1e-12) on {} random states",
            worst, states
        ),
        worst <= 1e-12 && states == 100,
    ));

    criterion("gradient and energy-transcription oracles", checks);
}

fn gradient_mismatch<F, G>(f: F, grad: G, x: &Vector) -> f64
where
    F: Fn(&Vector) -> f64,
    G: Fn(&Vector) -> Vector,
{
    let h = 1e-5 * (1.0 + x.norm());
    let mut fd = Vector::zeros(x.dim());
    for i in 0..x.dim() {
        let mut plus = x.clone();
        plus[i] += h;
        let mut minus = x.clone();
        minus[i] -= h;
        fd[i] = (f(&plus) - f(&minus)) / (2.0 * h);
    }
    let g = grad(x);
    (&fd - &g).norm() / (1.0 + g.norm())
}

/// Second transcription of the energies, written with scalar loops straight
/// from the defining formulas (power-law scalings only).
fn transcribed_energies(
    state: &SimState,
    prm: &DynamicsParams,
    problem: &dyn SaddleProblem,
    sp: &SaddlePoint,
) -> (f64, f64, f64) {
    let t = state.t;
    let r = match prm.beta {
        ScalingSpec::PowerLaw { r } => r,
        _ => unreachable!(),
    };
    let beta = t.powf(r);
    let k = problem.coupling();
    let lagr = |x: &Vector, y: &Vector| {
        let mut coupling = 0.0;
        for i in 0..k.rows() {
            let mut kx = 0.0;
            for j in 0..k.cols() {
                kx += k.get(i, j) * x[j];
            }
            coupling += kx * y[i];
        }
        problem.f(x) + coupling - problem.g(y)
    };
    let gap = lagr(&state.x, &sp.y) - lagr(&sp.x, &state.y);
    let sq = |v: &Vector| (0..v.dim()).map(|i| v[i] * v[i]).sum::<f64>();
    let tik = prm.c / (2.0 * t.powf(prm.p)) * (sq(&state.x) + sq(&state.y));

    let block_fast = |z: &Vector, zs: &Vector, vz: &Vector| {
        let mut w = 0.0;
        let mut d = 0.0;
        for i in 0..z.dim() {
            let a = (prm.alpha - 1.0) * (z[i] - zs[i]) + t.powf(prm.q) * vz[i];
            w += a * a;
            d += (z[i] - zs[i]) * (z[i] - zs[i]);
        }
        0.5 * w + (prm.alpha - 1.0) / 2.0 * (1.0 - prm.q * t.powf(prm.q - 1.0)) * d
    };
    let fast = t.powf(2.0 * prm.q) * beta * (gap + tik)
        + block_fast(&state.x, &sp.x, &state.vx)
        + block_fast(&state.y, &sp.y, &state.vy);

    let block_slow = |z: &Vector, zs: &Vector, vz: &Vector| {
        let mut w = 0.0;
        let mut d = 0.0;
        for i in 0..z.dim() {
            let a = (prm.alpha - 1.0) / t.powf(prm.q) * (z[i] - zs[i]) + vz[i];
            w += a * a;
            d += (z[i] - zs[i]) * (z[i] - zs[i]);
        }
        0.5 * w
            + (prm.alpha - 1.0) / 2.0
                * (prm.q / t.powf(prm.q + 1.0) + 1.0 / t.powf(2.0 * prm.q))
                * d
    };
    let slow = beta * (gap + tik)
        + block_slow(&state.x, &sp.x, &state.vx)
        + block_slow(&state.y, &sp.y, &state.vy);

    let strong = slow - prm.c * beta / (2.0 * t.powf(prm.p)) * (sq(&sp.x) + sq(&sp.y));
    (fast, slow, strong)
}

#[test]
fn c10_regression_study_ordering() {
    let (pairs, elapsed) = regression_pairs();
    let mut checks = Vec::new();
    for pair in pairs {
        let phi_with = pair.regularized.series.column(series::PHI).unwrap();
        let phi_without = pair.unregularized.series.column(series::PHI).unwrap();
        let finite = phi_with.iter().chain(phi_without).all(|v| v.is_finite());
        let with = pair.phi_final(true);
        let without = pair.phi_final(false);
        checks.push(check(
            format!(
                "{}: objective series finite; final {:.4e} (regularized) <= {:.4e} (unregularized)",
                pair.case.label, with, without
            ),
            finite && with <= without,
        ));
    }
    checks.push(check(
        format!("runtime {:.2?} < 180 s for the gated sizes", elapsed),
        *elapsed < Duration::from_secs(180),
    ));
    criterion(
        "regression study: regularization accelerates objective decay",
        checks,
    );
}

#[test]
fn c11_byte_identical_reruns() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_saddleflow");
    let mut checks = Vec::new();

    // the trajectory-comparison preset, rerun through the binary
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = Command::new(bin)
            .args([
                "run",
                "compare-regularized",
                "--out",
                dir.path().to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for file in ["trajectory.csv", "series.csv", "scenario.toml"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        checks.push(check(
            format!("trajectory preset: {} identical across reruns", file),
            a == b,
        ));
    }

    // the regression study, rerun with different worker counts
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&dir_a, "1"), (&dir_b, "4")] {
        let out = Command::new(bin)
            .args([
                "regress",
                "--out",
                dir.path().to_str().unwrap(),
                "--threads",
                threads,
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let mut all_identical = true;
    let mut compared = 0usize;
    for entry in std::fs::read_dir(dir_a.path()).unwrap() {
        let entry = entry.unwrap();
        if !entry.file_type().unwrap().is_dir() {
            continue;
        }
        for file in ["trajectory.csv", "series.csv", "problem.toml"] {
            let a = std::fs::read(entry.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(entry.file_name()).join(file)).unwrap();
            all_identical &= a == b;
            compared += 1;
        }
    }
    checks.push(check(
        format!(
            "regression study: {} files identical across 1-thread and 4-thread runs",
            compared
        ),
        all_identical && compared == 36,
    ));

    criterion("gated runs reproduce byte-identical outputs", checks);
}
