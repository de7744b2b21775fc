//! CSV and manifest emission.
//!
//! Every float is printed with 17 significant digits so CSVs round-trip
//! doubles exactly and reruns of the same scenario are byte-identical.

use saddleflow_core::scenario::ScenarioResult;
use saddleflow_core::tikhonov::MinNormSolution;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> io::Result<()> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    for line in lines {
        file.write_all(line.as_bytes())?;
        file.write_all(b"\n")?;
    }
    file.flush()
}

pub fn trajectory_csv(result: &ScenarioResult) -> Vec<String> {
    let n = result.problem.primal_dim();
    let m = result.problem.dual_dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{}", i)));
    header.extend((1..=m).map(|i| format!("y_{}", i)));
    header.extend((1..=n).map(|i| format!("vx_{}", i)));
    header.extend((1..=m).map(|i| format!("vy_{}", i)));
    let mut lines = vec![header.join(",")];
    for s in &result.trajectory.samples {
        let mut row = Vec::with_capacity(1 + 2 * (n + m));
        row.push(fmt_f64(s.t));
        for v in s.to_flat() {
            row.push(fmt_f64(v));
        }
        lines.push(row.join(","));
    }
    lines
}

pub fn series_csv(result: &ScenarioResult) -> Vec<String> {
    let table = &result.series;
    let mut header = vec!["t".to_string()];
    header.extend(table.names.iter().cloned());
    let mut lines = vec![header.join(",")];
    for (i, &t) in table.t.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        for col in &table.columns {
            row.push(fmt_f64(col[i]));
        }
        lines.push(row.join(","));
    }
    lines
}

pub fn path_csv(solution: &MinNormSolution) -> Vec<String> {
    let dim = solution.z.dim();
    let mut header = vec!["epsilon".to_string()];
    header.extend((1..=dim).map(|i| format!("z_{}", i)));
    header.push("grad_norm".to_string());
    let mut lines = vec![header.join(",")];
    for point in &solution.path {
        let mut row = Vec::with_capacity(dim + 2);
        row.push(fmt_f64(point.epsilon));
        for i in 0..dim {
            row.push(fmt_f64(point.z[i]));
        }
        row.push(fmt_f64(point.grad_norm));
        lines.push(row.join(","));
    }
    lines
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    scenario: &'a str,
    /// sha256 over the scenario.toml bytes written next to this manifest.
    scenario_digest: String,
    seeds: Vec<u64>,
    wall_time_ms: u64,
    outputs: Vec<String>,
    integrator: &'a saddleflow_core::scenario::IntegratorSpec,
}

/// Writes scenario.toml, trajectory.csv, series.csv, the problem instance
/// dump for generated problems, and manifest.toml into `dir`.
pub fn write_scenario_bundle(
    dir: &Path,
    result: &ScenarioResult,
    wall_time_ms: u64,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let scenario_text = result.scenario.to_toml();
    fs::write(dir.join("scenario.toml"), &scenario_text)?;
    write_lines(&dir.join("trajectory.csv"), trajectory_csv(result))?;
    write_lines(&dir.join("series.csv"), series_csv(result))?;

    fs::write(
        dir.join("assumptions.toml"),
        toml::to_string(&result.assumptions).expect("report serialization"),
    )?;

    let mut outputs = vec![
        "scenario.toml".to_string(),
        "trajectory.csv".to_string(),
        "series.csv".to_string(),
        "assumptions.toml".to_string(),
    ];
    let mut seeds = Vec::new();
    if let saddleflow_core::scenario::ProblemRef::Regression(cfg) = &result.scenario.problem {
        seeds.push(cfg.seed);
        let instance = saddleflow_core::problem::SmoothedL1Regression::generate(cfg)
            .expect("validated during the run");
        fs::write(dir.join("problem.toml"), instance.to_instance_toml())?;
        outputs.push("problem.toml".to_string());
    }

    let digest = format!("sha256:{:x}", Sha256::digest(scenario_text.as_bytes()));
    let manifest = Manifest {
        tool: "saddleflow",
        version: env!("CARGO_PKG_VERSION"),
        scenario: &result.scenario.name,
        scenario_digest: digest,
        seeds,
        wall_time_ms,
        outputs,
        integrator: &result.scenario.integrator,
    };
    fs::write(
        dir.join("manifest.toml"),
        toml::to_string(&manifest).expect("manifest serialization"),
    )?;
    Ok(())
}

pub fn write_path_csv(path: &Path, solution: &MinNormSolution) -> io::Result<()> {
    write_lines(path, path_csv(solution))
}
