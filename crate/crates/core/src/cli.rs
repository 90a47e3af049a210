//! Command-line front end: `simulate`, `sweep`, `probe` and `report`.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::diagnostics::{difference_norm, fit_log_bound, write_energy_csv};
use crate::error::Error;
use crate::geometry::InterfaceState;
use crate::limit_lab::{log_log_fit, sweep_with_config_text};
use crate::singular_ops::CurveOps;
use crate::spectral::Grid;
use crate::timestepper::{load_trajectory, run, write_trajectory, RunMetadata, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "hydrosheet", version, about = "Hydroelastic vortex sheet solver and limit-study harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Configuration file (INI).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a configuration value, `section.key=value`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for concurrent runs.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for the probe's random starts.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one run and write its trajectory and energy table.
    Simulate(Common),
    /// Run the configured parameter ladder and fit the Cauchy rate.
    Sweep(Common),
    /// Estimate the norm of the preconditioned γ_t operator at the initial state.
    Probe(Common),
    /// Recompute energy fits and difference tables from a previous output directory.
    Report(Common),
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParams(_) | Error::InvalidGrid(_) | Error::DuplicateZeroPair(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(c) => with_threads(c, simulate),
        Command::Sweep(c) => with_threads(c, sweep),
        Command::Probe(c) => with_threads(c, probe),
        Command::Report(c) => with_threads(c, report),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Run(m)) => {
            eprintln!("run failed: {m}");
            EXIT_RUN_FAILURE
        }
    }
}

fn with_threads(c: &Common, f: fn(&Common) -> std::result::Result<i32, Failure>) -> std::result::Result<i32, Failure> {
    match c.threads {
        Some(0) => Err(Failure::Config("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Failure::Run(e.to_string()))?;
            pool.install(|| f(c))
        }
        None => f(c),
    }
}

fn load(c: &Common) -> std::result::Result<(RunConfig, String), Failure> {
    let path = c.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = RunConfig::from_file(path, &c.overrides)?;
    if let Some(seed) = c.seed {
        cfg.policy.probe_seed = seed;
    }
    let text = cfg.effective_text();
    Ok((cfg, text))
}

fn prepare_out(c: &Common, effective: &str) -> std::result::Result<(), Failure> {
    std::fs::create_dir_all(&c.out).map_err(|e| Failure::Run(format!("cannot create {}: {e}", c.out.display())))?;
    std::fs::write(c.out.join("effective.ini"), effective).map_err(|e| Failure::Run(e.to_string()))?;
    Ok(())
}

fn io(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

fn simulate(c: &Common) -> std::result::Result<i32, Failure> {
    let (cfg, text) = load(c)?;
    prepare_out(c, &text)?;
    let initial = cfg.initial.state(&Grid::new(cfg.grid_size)?)?;
    let traj = run(&initial, &cfg.params, &cfg.policy, cfg.t_end)?;
    write_trajectory(&traj, &RunMetadata::new(&traj, &cfg.policy, cfg.t_end, &text), &c.out.join("run_00.jsonl"), &c.out.join("run_00.meta.json"))?;
    write_energy_csv(BufWriter::new(File::create(c.out.join("energy_00.csv")).map_err(io)?), &traj.diagnostics)?;
    let summary = json!({
        "final_time": traj.last().time,
        "steps": traj.steps.len(),
        "failure": traj.failure,
        "log_bound": log_bound_json(&traj),
    });
    std::fs::write(c.out.join("summary.json"), serde_json::to_string_pretty(&summary).map_err(io)?).map_err(io)?;
    match &traj.failure {
        None => {
            println!("completed t = {} in {} steps", traj.last().time, traj.steps.len());
            Ok(EXIT_OK)
        }
        Some(f) => {
            eprintln!("run stopped at t = {}: {} ({})", f.time, f.kind, f.message);
            Ok(EXIT_RUN_FAILURE)
        }
    }
}

fn log_bound_json(traj: &Trajectory) -> serde_json::Value {
    let series: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.time, d.e_total)).collect();
    match fit_log_bound(&series) {
        Ok(f) => json!({"c1": f.c1, "c2": f.c2, "c3": f.c3, "max_violation": f.max_violation}),
        Err(e) => json!({"error": e.kind(), "message": e.to_string()}),
    }
}

fn sweep(c: &Common) -> std::result::Result<i32, Failure> {
    let (cfg, text) = load(c)?;
    prepare_out(c, &text)?;
    let result = sweep_with_config_text(&cfg.sweep_config(Some(&c.out)), &text)?;
    match result.cauchy {
        Some(f) => println!("cauchy slope {:.4} (r² {:.4}) over {} pairs", f.slope, f.r_squared, f.points),
        None => println!("cauchy slope unavailable"),
    }
    let failed = result.runs.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs stopped early", result.runs.len());
        return Ok(EXIT_RUN_FAILURE);
    }
    Ok(EXIT_OK)
}

fn probe(c: &Common) -> std::result::Result<i32, Failure> {
    let (cfg, text) = load(c)?;
    prepare_out(c, &text)?;
    let initial = cfg.initial.state(&Grid::new(cfg.grid_size)?)?;
    let ops = CurveOps::with_closure_tolerance(&initial, cfg.policy.closure_tolerance)?;
    let pairs = if cfg.pairs.is_empty() { vec![(cfg.params.sigma, cfg.params.rho0)] } else { cfg.pairs.clone() };
    let mut w = csv::Writer::from_writer(File::create(c.out.join("probe.csv")).map_err(io)?);
    w.write_record(["sigma", "rho0", "estimated_norm", "iterations", "converged"]).map_err(io)?;
    for (sigma, rho0) in pairs {
        let params = cfg.params.with_sheet(sigma, rho0);
        params.validate()?;
        let r = ops.probe_t_norm(&params, cfg.policy.probe_trials.max(1), cfg.policy.probe_seed);
        println!("sigma {sigma} rho0 {rho0}: norm {:.6e}", r.estimated_norm);
        w.write_record([sigma.to_string(), rho0.to_string(), r.estimated_norm.to_string(), r.iterations.to_string(), r.converged.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(EXIT_OK)
}

/// Pairs of `(run_XX.jsonl, run_XX.meta.json)` found in a directory, sorted by name.
fn persisted_runs(dir: &Path) -> std::io::Result<Vec<(PathBuf, PathBuf)>> {
    let mut found = vec![];
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if let Some(stem) = name.strip_suffix(".jsonl").filter(|s| s.starts_with("run_")) {
            let meta = dir.join(format!("{stem}.meta.json"));
            if meta.exists() {
                found.push((path, meta));
            }
        }
    }
    found.sort();
    Ok(found)
}

fn report(c: &Common) -> std::result::Result<i32, Failure> {
    let runs = persisted_runs(&c.out).map_err(|e| Failure::Config(format!("cannot read {}: {e}", c.out.display())))?;
    if runs.is_empty() {
        return Err(Failure::Config(format!("no persisted runs in {}", c.out.display())));
    }
    let mut entries = vec![];
    let mut finals: Vec<Option<(f64, f64, InterfaceState)>> = vec![];
    for (jsonl, meta) in &runs {
        let traj = load_trajectory(jsonl, meta)?;
        entries.push(json!({
            "trajectory": jsonl.file_name().and_then(|n| n.to_str()),
            "sigma": traj.params.sigma,
            "rho0": traj.params.rho0,
            "final_time": traj.last().time,
            "failure": traj.failure,
            "log_bound": log_bound_json(&traj),
        }));
        finals.push(traj.completed().then(|| (traj.params.sigma, traj.params.rho0, traj.last().clone())));
    }
    let mut points = vec![];
    for j in 0..finals.len() {
        for k in j + 1..finals.len() {
            if let (Some(a), Some(b)) = (&finals[j], &finals[k]) {
                points.push(((a.0 - b.0).abs() + (a.1 - b.1).abs(), difference_norm(&a.2, &b.2)?));
            }
        }
    }
    let cauchy = log_log_fit(&points).ok();
    let summary = json!({
        "runs": entries,
        "slope": cauchy.map(|f| f.slope),
        "intercept": cauchy.map(|f| f.intercept),
        "r_squared": cauchy.map(|f| f.r_squared),
    });
    std::fs::write(c.out.join("report.json"), serde_json::to_string_pretty(&summary).map_err(io)?).map_err(io)?;
    println!("reported {} runs", runs.len());
    Ok(EXIT_OK)
}
