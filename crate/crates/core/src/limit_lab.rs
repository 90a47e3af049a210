//! Parameter sweeps toward `(σ, ρ₀) = (0, 0)` and the Cauchy-rate regression.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{difference_norm, write_energy_csv};
use crate::error::{Error, Result};
use crate::geometry::{InterfaceState, PhysParams};
use crate::spectral::{Grid, PeriodicField};
use crate::timestepper::{run, stable_dt, write_trajectory, RunFailure, RunMetadata, StepPolicy, TimeStep, Trajectory};

/// Fractions of `t_end` at which difference tables are formed.
pub const CHECKPOINT_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Truncated Fourier series `mean + Σ_k cos[k−1]·cos kα + sin[k−1]·sin kα`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn sample(&self, grid: &Grid) -> PeriodicField {
        PeriodicField::from_fn(grid, |a| {
            let c: f64 = self.cos.iter().enumerate().map(|(i, c)| c * ((i + 1) as f64 * a).cos()).sum();
            let s: f64 = self.sin.iter().enumerate().map(|(i, s)| s * ((i + 1) as f64 * a).sin()).sum();
            self.mean + c + s
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub theta: FourierSeries,
    pub gamma: FourierSeries,
}

impl InitialCondition {
    pub fn state(&self, grid: &Grid) -> Result<InterfaceState> {
        InterfaceState::new(self.theta.sample(grid), self.gamma.sample(grid), 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub initial: InitialCondition,
    /// Fluid constants; σ and ρ₀ are taken from `pairs`.
    pub base: PhysParams,
    /// `(σ, ρ₀)` for each run.
    pub pairs: Vec<(f64, f64)>,
    pub grid_size: usize,
    pub t_end: f64,
    pub policy: StepPolicy,
    pub output_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<usize> {
        let zeros: Vec<usize> = self.pairs.iter().enumerate().filter(|(_, p)| **p == (0.0, 0.0)).map(|(i, _)| i).collect();
        if zeros.len() != 1 {
            return Err(Error::DuplicateZeroPair(zeros.len()));
        }
        if self.pairs.iter().any(|&(s, r)| !(s >= 0.0 && r >= 0.0 && s.is_finite() && r.is_finite())) {
            return Err(Error::Config("sweep pairs must be nonnegative".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        Grid::new(self.grid_size)?;
        self.policy.validate()?;
        for &(s, r) in &self.pairs {
            self.base.with_sheet(s, r).validate()?;
        }
        Ok(zeros[0])
    }

    pub fn params(&self, index: usize) -> PhysParams {
        let (s, r) = self.pairs[index];
        self.base.with_sheet(s, r)
    }
}

/// The shared step size and checkpoint spacing of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub dt: f64,
    /// Steps between consecutive checkpoints.
    pub steps_per_checkpoint: usize,
    pub policy: StepPolicy,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// One fixed dt for every run, no larger than the stiffest run allows, dividing
/// each checkpoint interval into a whole number of steps.
pub fn schedule(config: &SweepConfig, initial: &InterfaceState) -> SweepSchedule {
    let interval = config.t_end / CHECKPOINT_FRACTIONS.len() as f64;
    let target = match config.policy.dt {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Auto => (0..config.pairs.len())
            .map(|i| stable_dt(&config.params(i), initial.length, initial.grid(), config.policy.cfl_constant))
            .fold(f64::INFINITY, f64::min),
    };
    let m = if target.is_finite() { ((interval / target) * (1.0 - 1e-12)).ceil().max(1.0) as usize } else { 1 };
    let dt = interval / m as f64;
    let cadence = gcd(m, config.policy.monitor_cadence.min(m));
    SweepSchedule { dt, steps_per_checkpoint: m, policy: StepPolicy { dt: TimeStep::Fixed(dt), monitor_cadence: cadence, ..config.policy } }
}

/// Where one run's artifacts were written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub trajectory: PathBuf,
    pub metadata: PathBuf,
    pub energy: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sigma: f64,
    pub rho0: f64,
    pub final_time: f64,
    pub steps: usize,
    pub failure: Option<RunFailure>,
    pub max_probe_norm: Option<f64>,
    pub max_residual: f64,
    pub artifacts: Option<RunArtifacts>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub pairs: Vec<(f64, f64)>,
    pub zero_index: usize,
    pub schedule: SweepSchedule,
    pub checkpoint_times: Vec<f64>,
    /// `tables[c][j][k]`: difference norm at checkpoint `c`; `None` when either run stopped early.
    pub tables: Vec<Vec<Vec<Option<f64>>>>,
    /// `limit_distances[c][k] = tables[c][k][zero_index]`.
    pub limit_distances: Vec<Vec<Option<f64>>>,
    pub cauchy: Option<CauchyFit>,
    pub runs: Vec<RunSummary>,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

impl SweepResult {
    /// Difference table at `t_end`.
    pub fn final_table(&self) -> &[Vec<Option<f64>>] {
        self.tables.last().expect("at least one checkpoint")
    }

    pub fn parameter_distance(&self, j: usize, k: usize) -> f64 {
        let (a, b) = (self.pairs[j], self.pairs[k]);
        (a.0 - b.0).abs() + (a.1 - b.1).abs()
    }
}

fn persist_run(dir: &Path, index: usize, traj: &Trajectory, policy: &StepPolicy, t_end: f64, config_text: &str) -> Result<RunArtifacts> {
    let artifacts = RunArtifacts {
        trajectory: dir.join(format!("run_{index:02}.jsonl")),
        metadata: dir.join(format!("run_{index:02}.meta.json")),
        energy: dir.join(format!("energy_{index:02}.csv")),
    };
    write_trajectory(traj, &RunMetadata::new(traj, policy, t_end, config_text), &artifacts.trajectory, &artifacts.metadata)?;
    write_energy_csv(BufWriter::new(File::create(&artifacts.energy)?), &traj.diagnostics)?;
    Ok(artifacts)
}

/// Runs every pair, builds the difference tables at each checkpoint and fits the
/// Cauchy rate. Run failures are recorded per pair and leave table entries empty.
pub fn sweep(config: &SweepConfig) -> Result<SweepResult> {
    sweep_with_config_text(config, "")
}

/// [`sweep`], recording the hash of `config_text` in each run's metadata.
pub fn sweep_with_config_text(config: &SweepConfig, config_text: &str) -> Result<SweepResult> {
    let zero_index = config.validate()?;
    let grid = Grid::new(config.grid_size)?;
    let initial = config.initial.state(&grid)?;
    let sched = schedule(config, &initial);
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir)?;
    }

    let outcomes: Vec<Result<(Trajectory, Option<RunArtifacts>)>> = (0..config.pairs.len())
        .into_par_iter()
        .map(|i| {
            let traj = run(&initial, &config.params(i), &sched.policy, config.t_end)?;
            let artifacts = match &config.output_dir {
                Some(dir) => Some(persist_run(dir, i, &traj, &sched.policy, config.t_end, config_text)?),
                None => None,
            };
            Ok((traj, artifacts))
        })
        .collect();
    let mut trajectories = vec![];
    let mut runs = vec![];
    for (i, o) in outcomes.into_iter().enumerate() {
        let (traj, artifacts) = o?;
        runs.push(RunSummary {
            sigma: config.pairs[i].0,
            rho0: config.pairs[i].1,
            final_time: traj.last().time,
            steps: traj.steps.len(),
            failure: traj.failure.clone(),
            max_probe_norm: traj.steps.iter().filter_map(|s| s.probe_norm).reduce(f64::max),
            max_residual: traj.steps.iter().map(|s| s.residual).fold(0.0, f64::max),
            artifacts,
        });
        trajectories.push(traj);
    }

    let n = config.pairs.len();
    let mut tables = vec![];
    let mut checkpoint_times = vec![];
    for (c, frac) in CHECKPOINT_FRACTIONS.iter().enumerate() {
        let step = sched.steps_per_checkpoint * (c + 1);
        checkpoint_times.push(config.t_end * frac);
        let states: Vec<Option<&InterfaceState>> = trajectories.iter().map(|t| t.at_step(step)).collect();
        let mut table = vec![vec![None; n]; n];
        for j in 0..n {
            for k in j..n {
                if let (Some(a), Some(b)) = (states[j], states[k]) {
                    let d = if j == k { 0.0 } else { difference_norm(a, b)? };
                    table[j][k] = Some(d);
                    table[k][j] = Some(d);
                }
            }
        }
        tables.push(table);
    }
    let limit_distances = tables.iter().map(|t| t.iter().map(|row| row[zero_index]).collect()).collect();
    let mut result = SweepResult {
        pairs: config.pairs.clone(),
        zero_index,
        schedule: sched,
        checkpoint_times,
        tables,
        limit_distances,
        cauchy: None,
        runs,
        trajectories,
    };
    result.cauchy = cauchy_rate(&result).ok();
    if let Some(dir) = &config.output_dir {
        write_pair_table(BufWriter::new(File::create(dir.join("pair_table.csv"))?), &result)?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary_json(&result))?)?;
    }
    Ok(result)
}

/// Least-squares line through `(ln x, ln y)`.
pub fn log_log_fit(points: &[(f64, f64)]) -> Result<CauchyFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable points, need 3", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all parameter distances equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(CauchyFit { slope, intercept, r_squared, points: pts.len() })
}

/// Slope and quality of `ln D(j,k)` against `ln(|Δσ| + |Δρ₀|)` over all pairs at `t_end`.
pub fn cauchy_rate(result: &SweepResult) -> Result<CauchyFit> {
    let table = result.final_table();
    let mut points = vec![];
    for j in 0..table.len() {
        for k in j + 1..table.len() {
            if let Some(d) = table[j][k] {
                points.push((result.parameter_distance(j, k), d));
            }
        }
    }
    log_log_fit(&points)
}

pub const PAIR_TABLE_HEADER: [&str; 10] =
    ["checkpoint", "time", "j", "k", "sigma_j", "rho0_j", "sigma_k", "rho0_k", "param_distance", "difference_norm"];

/// One row per unordered pair `j < k` and checkpoint; an empty norm marks a failed run.
pub fn write_pair_table<W: std::io::Write>(writer: W, result: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PAIR_TABLE_HEADER)?;
    for (c, table) in result.tables.iter().enumerate() {
        for j in 0..table.len() {
            for k in j + 1..table.len() {
                let (a, b) = (result.pairs[j], result.pairs[k]);
                w.write_record([
                    c.to_string(),
                    result.checkpoint_times[c].to_string(),
                    j.to_string(),
                    k.to_string(),
                    a.0.to_string(),
                    a.1.to_string(),
                    b.0.to_string(),
                    b.1.to_string(),
                    result.parameter_distance(j, k).to_string(),
                    table[j][k].map(|d| d.to_string()).unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn summary_json(result: &SweepResult) -> serde_json::Value {
    serde_json::json!({
        "format_version": 1,
        "slope": result.cauchy.map(|c| c.slope),
        "intercept": result.cauchy.map(|c| c.intercept),
        "r_squared": result.cauchy.map(|c| c.r_squared),
        "points": result.cauchy.map(|c| c.points),
        "pairs": result.pairs,
        "zero_index": result.zero_index,
        "dt": result.schedule.dt,
        "steps_per_checkpoint": result.schedule.steps_per_checkpoint,
        "checkpoint_times": result.checkpoint_times,
        "limit_distances": result.limit_distances,
        "failures": result.runs.iter().enumerate()
            .filter_map(|(i, r)| r.failure.as_ref().map(|f| serde_json::json!({"run": i, "kind": f.kind, "time": f.time, "message": f.message})))
            .collect::<Vec<_>>(),
        "runs": result.runs,
    })
}
