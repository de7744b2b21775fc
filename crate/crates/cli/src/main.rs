//! saddleflow: simulate the Tikhonov-regularized inertial primal-dual
//! system, check its parameter regimes, fit empirical rates, and compute
//! minimal-norm saddle points.
//!
//! Exit codes are a stable contract: 0 ok, 2 input error, 3 integration
//! failure, 4 data error, 5 path non-convergence.

mod output;

use clap::{Parser, Subcommand};
use saddleflow_core::diagnostics::{
    check_assumptions, check_assumptions_sampled, fit_rate, AssumptionReport, DiagnosticsError,
};
use saddleflow_core::dynamics::{DynamicsParams, ScalingSpec};
use saddleflow_core::problem::builtin;
use saddleflow_core::scenario::{
    self, compare_scenario, regression_cases, regression_study, run_all, run_scenario, series,
    sweep_scenario, Scenario, ScenarioError, ScenarioResult, REGRESSION_KAPPAS, SWEEP_P_VALUES,
};
use saddleflow_core::tikhonov::{default_epsilon_schedule, min_norm_solution, PathError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "saddleflow",
    version,
    about = "Inertial primal-dual dynamics with vanishing Tikhonov regularization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write trajectory/series CSVs plus a manifest.
    Run {
        /// Scenario TOML file, or the name of a built-in preset.
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the regime conditions for a parameter set.
    Check {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        c: f64,
        /// Power-law exponent r of the time scaling t^r.
        #[arg(long = "beta-pow")]
        beta_pow: f64,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        /// Force the grid-sampled code path instead of closed forms.
        #[arg(long)]
        sampled: bool,
        /// Also write the report as TOML.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a log-log slope to a CSV series over a time window.
    Rate {
        series_csv: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
    },
    /// Compute the minimal-norm saddle point via the regularization path.
    Minnorm {
        /// Problem registry name (see `run` presets for generated instances).
        #[arg(long)]
        problem: String,
        /// Directory for the path CSV.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the p-sweep preset (four runs on [1, 200]).
    Sweep {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the regularized-vs-unregularized comparison preset ([1, 20]).
    Compare {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the regression study (three damping/scaling cases, with and
    /// without regularization, per condition number).
    Regress {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Condition numbers, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = REGRESSION_KAPPAS)]
        kappa: Vec<f64>,
        #[arg(long, default_value_t = scenario::DEFAULT_REGRESSION_SEED)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

enum CliError {
    Input(String),
    Integration(String),
    Data(String),
    Path(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Integration(_) => 3,
            CliError::Data(_) => 4,
            CliError::Path(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m)
            | CliError::Integration(m)
            | CliError::Data(m)
            | CliError::Path(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("io error: {}", e))
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match &e {
            ScenarioError::Integrate(inner) => match inner {
                saddleflow_core::integrator::IntegrateError::Config(_) => {
                    CliError::Input(e.to_string())
                }
                _ => CliError::Integration(e.to_string()),
            },
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PathError> for CliError {
    fn from(e: PathError) -> Self {
        CliError::Path(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out } => cmd_run(&scenario, &out),
        Command::Check {
            alpha,
            q,
            p,
            c,
            beta_pow,
            t0,
            sampled,
            out,
        } => cmd_check(alpha, q, p, c, beta_pow, t0, sampled, out.as_deref()),
        Command::Rate {
            series_csv,
            column,
            from,
            to,
        } => cmd_rate(&series_csv, &column, from, to),
        Command::Minnorm { problem, out } => cmd_minnorm(&problem, &out),
        Command::Sweep { out, threads } => cmd_sweep(&out, threads),
        Command::Compare { out } => cmd_compare(&out),
        Command::Regress {
            out,
            m,
            n,
            kappa,
            seed,
            threads,
        } => cmd_regress(&out, m, n, &kappa, seed, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> usize {
    if let Some(n) = flag {
        return n.max(1);
    }
    if let Ok(v) = std::env::var("SADDLEFLOW_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get().min(8))
        .unwrap_or(1)
}

fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    if let Some(preset) = scenario::preset(arg) {
        return Ok(preset);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Input(format!(
            "{:?} is neither a scenario file nor a preset name",
            arg
        )));
    }
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml(&text).map_err(|e| CliError::Input(e.to_string()))
}

fn run_and_emit(scenario: &Scenario, dir: &Path) -> Result<ScenarioResult, CliError> {
    let start = Instant::now();
    let result = run_scenario(scenario)?;
    output::write_scenario_bundle(dir, &result, start.elapsed().as_millis() as u64)?;
    Ok(result)
}

fn cmd_run(scenario_arg: &str, out: &Path) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_arg)?;
    let result = run_and_emit(&scenario, out)?;
    let last = result.trajectory.last();
    let endpoint_norm = (last.x.norm_sq() + last.y.norm_sq()).sqrt();
    println!("scenario: {}", scenario.name);
    println!(
        "samples: {}  accepted: {}  rejected: {}  rhs evals: {}",
        result.trajectory.samples.len(),
        result.trajectory.accepted_steps,
        result.trajectory.rejected_steps,
        result.trajectory.rhs_evals
    );
    println!("final t: {}  |(x, y)|: {:.6e}", last.t, endpoint_norm);
    print_regimes(&result.assumptions);
    for fit in &result.rate_fits {
        println!(
            "rate[{}]: slope {:.4}  r^2 {:.6}  window [{}, {}]{}",
            fit.series,
            fit.fit.slope,
            fit.fit.r_squared,
            fit.fit.window.0,
            fit.fit.window.1,
            if fit.floored > 0 {
                format!("  ({} values floored)", fit.floored)
            } else {
                String::new()
            }
        );
    }
    println!("outputs written to {}", out.display());
    Ok(())
}

fn print_regimes(report: &AssumptionReport) {
    for v in &report.conditions {
        let status = if v.holds { "holds" } else { "fails" };
        let threshold = v
            .threshold_t
            .map(|t| format!(" from t >= {:.6}", t))
            .unwrap_or_default();
        println!("  [{}] {}{} — {}", status, v.name, threshold, v.detail);
    }
    println!(
        "regimes: fast gap decay 1/(t^2q beta): {} | vanishing scaled gap o(1/beta): {} | minimal-norm selection: {}",
        verdict(report.fast),
        verdict(report.slow),
        verdict(report.strong)
    );
    if let Some(m) = report.witness_m {
        println!("witness margin M = {:.6}", m);
    }
    if !report.tikhonov_enabled {
        println!("note: c = 0 disables the regularization terms; no minimal-norm selection");
    }
}

fn verdict(b: bool) -> &'static str {
    if b {
        "certified"
    } else {
        "not certified"
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    alpha: f64,
    q: f64,
    p: f64,
    c: f64,
    beta_pow: f64,
    t0: f64,
    sampled: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let params = DynamicsParams {
        alpha,
        q,
        p,
        c,
        beta: ScalingSpec::power_law(beta_pow),
        t0,
    };
    let report = if sampled {
        check_assumptions_sampled(&params, 1e6)
    } else {
        check_assumptions(&params)
    }
    .map_err(|e| CliError::Input(e.to_string()))?;
    println!(
        "parameters: alpha={} q={} p={} c={} beta=t^{} t0={}",
        alpha, q, p, c, beta_pow, t0
    );
    print_regimes(&report);
    if let Some(path) = out {
        std::fs::write(
            path,
            toml::to_string(&report).expect("report serialization"),
        )?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_rate(series_csv: &Path, column: &str, from: f64, to: f64) -> Result<(), CliError> {
    let text = std::fs::read_to_string(series_csv)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Input("empty CSV".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    let t_idx = names
        .iter()
        .position(|&n| n == "t")
        .ok_or_else(|| CliError::Input("CSV has no t column".into()))?;
    let col_idx = names.iter().position(|&n| n == column).ok_or_else(|| {
        CliError::Input(format!(
            "CSV has no column {:?} (available: {})",
            column,
            names.join(", ")
        ))
    })?;
    let mut pairs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(CliError::Input(format!(
                "line {}: {} fields, expected {}",
                lineno + 2,
                fields.len(),
                names.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| CliError::Input(format!("line {}: {}", lineno + 2, e)))
        };
        pairs.push((parse(fields[t_idx])?, parse(fields[col_idx])?));
    }
    let fit = fit_rate(&pairs, (from, to)).map_err(|e| match e {
        DiagnosticsError::NonPositiveValue { .. } | DiagnosticsError::TooFewPoints { .. } => {
            CliError::Data(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    })?;
    println!(
        "slope {:.12}  intercept {:.12}  r^2 {:.12}  points {}",
        fit.slope, fit.intercept, fit.r_squared, fit.points
    );
    Ok(())
}

fn cmd_minnorm(problem_name: &str, out: &Path) -> Result<(), CliError> {
    let problem = builtin(problem_name).ok_or_else(|| {
        CliError::Input(format!(
            "unknown problem {:?} (available: {})",
            problem_name,
            saddleflow_core::problem::builtin_names().join(", ")
        ))
    })?;
    let reference = problem.known_min_norm_saddle().ok_or_else(|| {
        CliError::Input(format!(
            "problem {:?} has no reference saddle for the path computation",
            problem_name
        ))
    })?;
    let solution = min_norm_solution(problem.as_ref(), &reference, &default_epsilon_schedule())?;
    std::fs::create_dir_all(out)?;
    let csv_path = out.join("path.csv");
    output::write_path_csv(&csv_path, &solution)?;
    let z: Vec<String> = (0..solution.z.dim())
        .map(|i| output::fmt_f64(solution.z[i]))
        .collect();
    println!("minimal-norm point: [{}]", z.join(", "));
    println!(
        "kkt residual: {:.6e}  final epsilon: {:.1e}  cauchy gap: {:.6e}",
        solution.certificate.kkt_residual,
        solution.certificate.final_epsilon,
        solution.certificate.cauchy_gap
    );
    println!("path written to {}", csv_path.display());
    Ok(())
}

fn emit_all(results: &[ScenarioResult], out: &Path, wall_ms: u64) -> Result<(), CliError> {
    for result in results {
        output::write_scenario_bundle(&out.join(&result.scenario.name), result, wall_ms)?;
    }
    Ok(())
}

fn cmd_sweep(out: &Path, threads: Option<usize>) -> Result<(), CliError> {
    let workers = resolve_threads(threads);
    let start = Instant::now();
    let scenarios: Vec<Scenario> = SWEEP_P_VALUES.iter().map(|&p| sweep_scenario(p)).collect();
    let results: Result<Vec<ScenarioResult>, ScenarioError> =
        run_all(scenarios, workers).into_iter().collect();
    let results = results?;
    emit_all(&results, out, start.elapsed().as_millis() as u64)?;
    for r in &results {
        let gap_slope = r
            .rate_fits
            .iter()
            .find(|f| f.series == series::GAP)
            .map(|f| format!("{:.4}", f.fit.slope))
            .unwrap_or_else(|| "n/a".into());
        let vel = r
            .series
            .column(series::VEL_NORM)
            .expect("preset records it");
        println!(
            "{}: gap slope {}  velocity first {:.4e} last {:.4e}",
            r.scenario.name,
            gap_slope,
            vel.first().unwrap(),
            vel.last().unwrap()
        );
    }
    println!("outputs written to {}", out.display());
    Ok(())
}

fn cmd_compare(out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let with = run_scenario(&compare_scenario(true))?;
    let without = run_scenario(&compare_scenario(false))?;
    emit_all(&[with, without], out, start.elapsed().as_millis() as u64)?;
    for name in ["compare-regularized", "compare-unregularized"] {
        let dir = out.join(name);
        println!("{}: outputs in {}", name, dir.display());
    }
    Ok(())
}

fn cmd_regress(
    out: &Path,
    m: usize,
    n: usize,
    kappas: &[f64],
    seed: u64,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let workers = resolve_threads(threads);
    let start = Instant::now();
    let cases = regression_cases(m, n, kappas, seed);
    let pairs = regression_study(&cases, workers)?;
    let wall = start.elapsed().as_millis() as u64;

    let mut comparison =
        vec!["case,kappa,phi_final_regularized,phi_final_unregularized".to_string()];
    for pair in &pairs {
        output::write_scenario_bundle(
            &out.join(&pair.regularized.scenario.name),
            &pair.regularized,
            wall,
        )?;
        output::write_scenario_bundle(
            &out.join(&pair.unregularized.scenario.name),
            &pair.unregularized,
            wall,
        )?;
        let with = pair.phi_final(true);
        let without = pair.phi_final(false);
        comparison.push(format!(
            "{},{},{},{}",
            pair.case.label,
            pair.case.kappa,
            output::fmt_f64(with),
            output::fmt_f64(without)
        ));
        println!(
            "{}: phi final with regularization {:.6e}  without {:.6e}  ({})",
            pair.case.label,
            with,
            without,
            if with <= without {
                "regularized run ahead"
            } else {
                "unregularized run ahead"
            }
        );
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("comparison.csv"), comparison.join("\n") + "\n")?;
    println!("outputs written to {}", out.display());
    Ok(())
}
