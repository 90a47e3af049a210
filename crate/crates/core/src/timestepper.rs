//! Time integration of (θ, γ, L), run monitors and trajectory persistence.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{energy_report, EnergyReport, DEFAULT_SOBOLEV_INDEX, ENERGY_CSV_VERSION};
use crate::error::{Error, Result};
use crate::evolution::{rhs_with, RhsOptions, StateDerivative};
use crate::geometry::{chord_arc_min, closure_defect, reconstruct_zd_with_tolerance, InterfaceState, PhysParams};
use crate::singular_ops::{d2_coefficient, OperatorProbeReport};
use crate::spectral::{Grid, PeriodicField};

pub const DEFAULT_FILTER_FLOOR: f64 = 1e-13;
pub const DEFAULT_CFL: f64 = 0.5;
pub const DEFAULT_CHORD_ARC_FLOOR: f64 = 0.1;
/// A step whose norm grows by more than this factor is rejected.
pub const STABILITY_GROWTH_LIMIT: f64 = 10.0;
pub const TRAJECTORY_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    Imex,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rk4" => Ok(Scheme::Rk4),
            "imex" => Ok(Scheme::Imex),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeStep {
    Fixed(f64),
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub scheme: Scheme,
    pub dt: TimeStep,
    pub cfl_constant: f64,
    pub filter_floor: f64,
    /// Snapshots and energy reports every this many steps (plus the first and last).
    pub monitor_cadence: usize,
    pub chord_arc_floor: f64,
    pub closure_tolerance: f64,
    /// Random starts of the operator-norm probe per step; 0 disables it.
    pub probe_trials: usize,
    pub probe_seed: u64,
    pub sobolev_index: u32,
    pub max_steps: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            dt: TimeStep::Auto,
            cfl_constant: DEFAULT_CFL,
            filter_floor: DEFAULT_FILTER_FLOOR,
            monitor_cadence: 10,
            chord_arc_floor: DEFAULT_CHORD_ARC_FLOOR,
            closure_tolerance: 1e-8,
            probe_trials: 0,
            probe_seed: 0,
            sobolev_index: DEFAULT_SOBOLEV_INDEX,
            max_steps: 1_000_000,
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("fixed dt must be positive");
            }
        }
        if !(self.cfl_constant > 0.0 && self.cfl_constant <= 1.0) {
            return bad("cfl_constant must lie in (0, 1]");
        }
        if !(self.filter_floor >= 0.0 && self.filter_floor.is_finite()) {
            return bad("filter_floor must be nonnegative");
        }
        if self.monitor_cadence == 0 {
            return bad("monitor_cadence must be positive");
        }
        if !(self.chord_arc_floor >= 0.0 && self.closure_tolerance > 0.0) {
            return bad("monitor thresholds must be nonnegative");
        }
        if self.sobolev_index < 4 {
            return bad("sobolev_index must be at least 4");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }

    fn rhs_options(&self, step: usize) -> RhsOptions {
        RhsOptions {
            probe_trials: self.probe_trials,
            probe_seed: self.probe_seed.wrapping_add(step as u64),
            closure_tolerance: self.closure_tolerance,
        }
    }
}

/// `(2π²/L²)|k|`, the θ_t response to γ̂_k in the linearization about the flat state.
fn theta_symbol(length: f64, k: f64) -> f64 {
    2.0 * PI * PI / (length * length) * k
}

/// `λk² + σĀk⁴`, the restoring symbol before `D₂⁻¹`.
fn restoring_symbol(params: &PhysParams, length: f64, k: f64) -> f64 {
    params.lambda(length) * k * k + params.sigma * params.a_bar(length) * k.powi(4)
}

/// Linearized angular frequency of mode `k` about the flat state of length `L`,
/// including the sheet inertia `D₂`.
pub fn linear_frequency(params: &PhysParams, length: f64, k: u64) -> f64 {
    let k = k as f64;
    (theta_symbol(length, k) * restoring_symbol(params, length, k) / (1.0 + d2_coefficient(params, length) * k)).sqrt()
}

/// Largest `ω(k)` over the resolved modes, from `ω² = (2π²/L²)k(λk² + σĀk⁴)`.
/// Leaving out the `D₂` inertia only overestimates ω.
pub fn max_frequency(params: &PhysParams, length: f64, grid: &Grid) -> f64 {
    let k = (grid.len() / 2) as f64;
    (theta_symbol(length, k) * restoring_symbol(params, length, k)).sqrt()
}

/// `cfl / max_k ω(k)`, or infinity for a state with no restoring force.
pub fn stable_dt(params: &PhysParams, length: f64, grid: &Grid, cfl: f64) -> f64 {
    let w = max_frequency(params, length, grid);
    if w > 0.0 {
        cfl / w
    } else {
        f64::INFINITY
    }
}

/// Statistics of one accepted step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: InterfaceState,
    pub iterations: usize,
    pub residual: f64,
    pub probe: Option<OperatorProbeReport>,
}

#[derive(Default)]
struct StageStats {
    iterations: usize,
    residual: f64,
    probe: Option<OperatorProbeReport>,
}

impl StageStats {
    fn eval(&mut self, state: &InterfaceState, params: &PhysParams, options: &RhsOptions) -> Result<StateDerivative> {
        let report = rhs_with(state, params, options)?;
        self.iterations = self.iterations.max(report.iterations);
        self.residual = self.residual.max(report.residual);
        if report.probe.is_some() {
            self.probe = report.probe;
        }
        Ok(report.derivative)
    }
}

fn shifted(state: &InterfaceState, d: &StateDerivative, h: f64) -> InterfaceState {
    InterfaceState {
        theta: &state.theta + &(&d.theta_t * h),
        gamma: &state.gamma + &(&d.gamma_t * h),
        length: state.length + h * d.length_t,
        time: state.time + h,
    }
}

/// Norm used by the blow-up monitor: `‖θ‖₂ + ‖γ‖_{3/2}`.
pub fn state_norm(state: &InterfaceState) -> f64 {
    state.theta.sobolev_norm(2.0) + state.gamma.sobolev_norm(1.5)
}

fn finish_step(before: &InterfaceState, mut after: InterfaceState, dt: f64, filter_floor: f64) -> Result<InterfaceState> {
    after.theta = after.theta.krasny_filter(filter_floor);
    after.gamma = after.gamma.krasny_filter(filter_floor);
    after.time = before.time + dt;
    let n0 = state_norm(before);
    let n1 = state_norm(&after);
    // Round-off around an exactly vanishing state is not growth.
    let reference = n0.max(filter_floor * before.grid().len() as f64);
    if !(n1.is_finite() && after.length.is_finite()) || n1 > STABILITY_GROWTH_LIMIT * reference {
        return Err(Error::StabilityViolated { time: after.time, before: n0, after: n1 });
    }
    Ok(after)
}

fn rk4_stages(state: &InterfaceState, params: &PhysParams, dt: f64, options: &RhsOptions) -> Result<(InterfaceState, StageStats)> {
    let mut stats = StageStats::default();
    let quiet = RhsOptions { probe_trials: 0, ..*options };
    let k1 = stats.eval(state, params, options)?;
    let k2 = stats.eval(&shifted(state, &k1, dt / 2.0), params, &quiet)?;
    let k3 = stats.eval(&shifted(state, &k2, dt / 2.0), params, &quiet)?;
    let k4 = stats.eval(&shifted(state, &k3, dt), params, &quiet)?;
    let w = dt / 6.0;
    let combine = |a: &PeriodicField, b: &PeriodicField, c: &PeriodicField, d: &PeriodicField| (a + &((b + c) * 2.0) + d) * w;
    let next = InterfaceState {
        theta: &state.theta + &combine(&k1.theta_t, &k2.theta_t, &k3.theta_t, &k4.theta_t),
        gamma: &state.gamma + &combine(&k1.gamma_t, &k2.gamma_t, &k3.gamma_t, &k4.gamma_t),
        length: state.length + w * (k1.length_t + 2.0 * (k2.length_t + k3.length_t) + k4.length_t),
        time: state.time + dt,
    };
    Ok((next, stats))
}

/// The per-mode 2×2 backward-Euler solve for the linear part, with the rest explicit.
fn imex_stages(state: &InterfaceState, params: &PhysParams, dt: f64, options: &RhsOptions) -> Result<(InterfaceState, StageStats)> {
    let mut stats = StageStats::default();
    let d = stats.eval(state, params, options)?;
    let l = state.length;
    let nyquist = (state.grid().len() / 2) as u64;
    let c2 = d2_coefficient(params, l);
    let a = move |k: u64| if k == nyquist { 0.0 } else { theta_symbol(l, k as f64) };
    let b = move |k: u64| {
        if k == nyquist {
            0.0
        } else {
            restoring_symbol(params, l, k as f64) / (1.0 + c2 * k as f64)
        }
    };

    // Explicit remainders: full right side minus its linear part.
    let n_theta = &d.theta_t - &state.gamma.radial_multiplier(a);
    let n_gamma = &d.gamma_t + &state.theta.radial_multiplier(b);
    let theta_star = &state.theta + &(&n_theta * dt);
    let gamma_star = &state.gamma + &(&n_gamma * dt);

    let gamma = (&gamma_star - &theta_star.radial_multiplier(|k| dt * b(k))).radial_multiplier(|k| 1.0 / (1.0 + dt * dt * a(k) * b(k)));
    let theta = &theta_star + &gamma.radial_multiplier(|k| dt * a(k));
    let next = InterfaceState { theta, gamma, length: l + dt * d.length_t, time: state.time + dt };
    Ok((next, stats))
}

/// One step of the given scheme with post-step filtering and the blow-up monitor.
pub fn advance(
    state: &InterfaceState,
    params: &PhysParams,
    dt: f64,
    scheme: Scheme,
    filter_floor: f64,
    options: &RhsOptions,
) -> Result<StepOutcome> {
    let (next, stats) = match scheme {
        Scheme::Rk4 => rk4_stages(state, params, dt, options)?,
        Scheme::Imex => imex_stages(state, params, dt, options)?,
    };
    let state = finish_step(state, next, dt, filter_floor)?;
    Ok(StepOutcome { state, iterations: stats.iterations, residual: stats.residual, probe: stats.probe })
}

/// Classical four-stage step with the default policy's filter floor and closure tolerance.
pub fn step_rk4(state: &InterfaceState, params: &PhysParams, dt: f64) -> Result<InterfaceState> {
    let policy = StepPolicy::default();
    Ok(advance(state, params, dt, Scheme::Rk4, policy.filter_floor, &policy.rhs_options(0))?.state)
}

/// First-order linearly implicit step with the default policy's filter floor and closure tolerance.
pub fn step_imex(state: &InterfaceState, params: &PhysParams, dt: f64) -> Result<InterfaceState> {
    let policy = StepPolicy::default();
    Ok(advance(state, params, dt, Scheme::Imex, policy.filter_floor, &policy.rhs_options(0))?.state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub iterations: usize,
    pub residual: f64,
    pub probe_norm: Option<f64>,
    pub chord_arc_min: f64,
    pub closure_defect: f64,
    pub length_drift: f64,
}

/// Machine-readable reason a run stopped before `t_end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub kind: String,
    pub time: f64,
    pub message: String,
}

impl RunFailure {
    fn from_error(e: &Error, time: f64) -> Self {
        Self { kind: e.kind().to_string(), time, message: e.to_string() }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<InterfaceState>,
    /// Step index of each snapshot.
    pub snapshot_steps: Vec<usize>,
    pub diagnostics: Vec<EnergyReport>,
    pub params: PhysParams,
    pub steps: Vec<StepRecord>,
    pub failure: Option<RunFailure>,
}

impl Trajectory {
    pub fn last(&self) -> &InterfaceState {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    /// Snapshot recorded at the given step, if any.
    pub fn at_step(&self, step: usize) -> Option<&InterfaceState> {
        self.snapshot_steps.iter().position(|&s| s == step).map(|i| &self.snapshots[i])
    }
}

fn check_admissible(state: &InterfaceState, policy: &StepPolicy) -> Result<f64> {
    let drift = state.length_drift()?;
    if drift > 1e-6 {
        return Err(Error::InvalidParams(format!("stored length disagrees with theta by {drift:e}")));
    }
    let zd = reconstruct_zd_with_tolerance(state, policy.closure_tolerance)?;
    let ratio = chord_arc_min(&zd);
    if ratio < policy.chord_arc_floor {
        return Err(Error::ChordArcFailed { time: state.time, value: ratio });
    }
    Ok(ratio)
}

/// Integrates to `t_end`. Monitor failures end the run early and are recorded in
/// the returned trajectory; invalid inputs are errors.
pub fn run(initial: &InterfaceState, params: &PhysParams, policy: &StepPolicy, t_end: f64) -> Result<Trajectory> {
    run_from(initial, 0, params, policy, t_end)
}

/// [`run`] starting from a state reached after `start_step` steps, so that probe
/// seeds and snapshot cadence line up with an uninterrupted run.
pub fn run_from(initial: &InterfaceState, start_step: usize, params: &PhysParams, policy: &StepPolicy, t_end: f64) -> Result<Trajectory> {
    params.validate()?;
    policy.validate()?;
    if !(t_end >= initial.time) || !t_end.is_finite() {
        return Err(Error::Config(format!("t_end {t_end} precedes the initial time {}", initial.time)));
    }
    check_admissible(initial, policy)?;

    let mut traj = Trajectory {
        snapshots: vec![initial.clone()],
        snapshot_steps: vec![start_step],
        diagnostics: vec![energy_report(initial, params, policy.sobolev_index)?],
        params: *params,
        steps: vec![],
        failure: None,
    };
    let options_for = |step| policy.rhs_options(step);
    let mut state = initial.clone();
    let mut step = start_step;
    while state.time < t_end {
        if step - start_step >= policy.max_steps {
            traj.failure = Some(RunFailure {
                kind: "StepLimit".into(),
                time: state.time,
                message: format!("reached {} steps before t_end", policy.max_steps),
            });
            break;
        }
        let nominal = match policy.dt {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Auto => stable_dt(params, state.length, state.grid(), policy.cfl_constant),
        };
        let remaining = t_end - state.time;
        // Land exactly on t_end rather than leave a sliver step.
        // A final step within rounding of the nominal one keeps the nominal size, so
        // that a run resumed from a persisted snapshot repeats the same arithmetic.
        let last = nominal >= remaining * (1.0 - 1e-9);
        let dt = if last && (nominal - remaining).abs() > 1e-9 * nominal { remaining } else { nominal };

        let outcome = advance(&state, params, dt, policy.scheme, policy.filter_floor, &options_for(step)).and_then(|mut o| {
            if last {
                o.state.time = t_end;
            }
            let zd = reconstruct_zd_with_tolerance(&o.state, policy.closure_tolerance)?;
            let ratio = chord_arc_min(&zd);
            if ratio < policy.chord_arc_floor {
                return Err(Error::ChordArcFailed { time: o.state.time, value: ratio });
            }
            Ok((o, ratio))
        });
        let (o, ratio) = match outcome {
            Ok(v) => v,
            Err(e) => {
                log::warn!("run stopped at t = {}: {e}", state.time);
                traj.failure = Some(RunFailure::from_error(&e, state.time));
                break;
            }
        };
        step += 1;
        state = o.state;
        traj.steps.push(StepRecord {
            step,
            time: state.time,
            dt,
            iterations: o.iterations,
            residual: o.residual,
            probe_norm: o.probe.map(|p| p.estimated_norm),
            chord_arc_min: ratio,
            closure_defect: closure_defect(&state.theta),
            length_drift: state.length_drift().unwrap_or(f64::INFINITY),
        });
        if step % policy.monitor_cadence == 0 || state.time >= t_end {
            traj.diagnostics.push(energy_report(&state, params, policy.sobolev_index)?);
            traj.snapshot_steps.push(step);
            traj.snapshots.push(state.clone());
        }
    }
    Ok(traj)
}

/// Git-style blob hash: `sha256("blob <len>\0" ++ content)` in hex.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

pub fn encode_f64(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

pub fn decode_f64(s: &str) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Format(format!("bad hex float {s:?}")))
}

#[derive(Serialize, Deserialize)]
struct SnapshotRecord {
    step: usize,
    time: String,
    length: String,
    theta: Vec<String>,
    gamma: Vec<String>,
    /// Decimal time for readers that do not decode the exact fields.
    t: f64,
}

impl SnapshotRecord {
    fn encode(step: usize, s: &InterfaceState) -> Self {
        Self {
            step,
            time: encode_f64(s.time),
            length: encode_f64(s.length),
            theta: s.theta.values().iter().map(|&v| encode_f64(v)).collect(),
            gamma: s.gamma.values().iter().map(|&v| encode_f64(v)).collect(),
            t: s.time,
        }
    }

    fn decode(&self) -> Result<(usize, InterfaceState)> {
        let grid = Grid::new(self.theta.len())?;
        let field = |v: &[String]| -> Result<PeriodicField> {
            PeriodicField::new(&grid, v.iter().map(|x| decode_f64(x)).collect::<Result<_>>()?)
        };
        Ok((
            self.step,
            InterfaceState {
                theta: field(&self.theta)?,
                gamma: field(&self.gamma)?,
                length: decode_f64(&self.length)?,
                time: decode_f64(&self.time)?,
            },
        ))
    }
}

/// Sidecar record describing a persisted trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub format_version: u32,
    pub energy_csv_version: u32,
    pub grid_size: usize,
    pub params: PhysParams,
    pub policy: StepPolicy,
    pub t_end: f64,
    pub config_hash: String,
    pub snapshot_count: usize,
    pub failure: Option<RunFailure>,
    pub steps: Vec<StepRecord>,
}

impl RunMetadata {
    pub fn new(traj: &Trajectory, policy: &StepPolicy, t_end: f64, config_text: &str) -> Self {
        Self {
            format_version: TRAJECTORY_FORMAT_VERSION,
            energy_csv_version: ENERGY_CSV_VERSION,
            grid_size: traj.last().grid().len(),
            params: traj.params,
            policy: *policy,
            t_end,
            config_hash: content_hash(config_text.as_bytes()),
            snapshot_count: traj.snapshots.len(),
            failure: traj.failure.clone(),
            steps: traj.steps.clone(),
        }
    }
}

/// Writes snapshots as JSONL and the metadata as a JSON sidecar.
pub fn write_trajectory(traj: &Trajectory, meta: &RunMetadata, jsonl: &Path, sidecar: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(jsonl)?);
    for (step, s) in traj.snapshot_steps.iter().zip(&traj.snapshots) {
        serde_json::to_writer(&mut w, &SnapshotRecord::encode(*step, s))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    std::fs::write(sidecar, serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Reads snapshots back as `(step, state)` pairs, bit-exact.
pub fn read_snapshots(jsonl: &Path) -> Result<Vec<(usize, InterfaceState)>> {
    let reader = BufReader::new(File::open(jsonl)?);
    let mut out = vec![];
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SnapshotRecord = serde_json::from_str(&line)?;
        out.push(record.decode()?);
    }
    Ok(out)
}

pub fn read_metadata(sidecar: &Path) -> Result<RunMetadata> {
    let meta: RunMetadata = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
    if meta.format_version != TRAJECTORY_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported trajectory format {}", meta.format_version)));
    }
    Ok(meta)
}

/// Rebuilds a trajectory from persisted files, recomputing the energy reports.
pub fn load_trajectory(jsonl: &Path, sidecar: &Path) -> Result<Trajectory> {
    let meta = read_metadata(sidecar)?;
    let records = read_snapshots(jsonl)?;
    if records.is_empty() {
        return Err(Error::Format("trajectory has no snapshots".into()));
    }
    let diagnostics = records
        .iter()
        .map(|(_, s)| energy_report(s, &meta.params, meta.policy.sobolev_index))
        .collect::<Result<_>>()?;
    let (snapshot_steps, snapshots) = records.into_iter().unzip();
    Ok(Trajectory { snapshots, snapshot_steps, diagnostics, params: meta.params, steps: meta.steps, failure: meta.failure })
}
