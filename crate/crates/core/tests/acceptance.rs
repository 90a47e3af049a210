//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fail.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{grid, pv_birkhoff_rott_conj, sample_state};
use hydrosheet::diagnostics::{difference_norm, fit_log_bound};
use hydrosheet::geometry::{frame, InterfaceState, PhysParams};
use hydrosheet::limit_lab::{sweep, FourierSeries, InitialCondition, SweepConfig, SweepResult};
use hydrosheet::singular_ops::CurveOps;
use hydrosheet::spectral::{ComplexPeriodicField, Grid, PeriodicField};
use hydrosheet::timestepper::{run, stable_dt, step_rk4, StepPolicy, TimeStep, DEFAULT_FILTER_FLOOR};

const TAU: f64 = 1.0;
const RHO1: f64 = 0.55;
const RHO2: f64 = 0.45;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn params(sigma: f64, rho0: f64) -> PhysParams {
    PhysParams::new(rho0, sigma, TAU, RHO1, RHO2, 0.0).unwrap()
}

/// Band-limited field with fixed pseudo-random coefficients and no Nyquist content.
fn generic_field(g: &Grid, salt: f64) -> PeriodicField {
    let kmax = (g.len() / 2 - 1).min(24);
    PeriodicField::from_fn(g, |a| {
        (1..=kmax)
            .map(|k| {
                let k = k as f64;
                ((1.3 * k + salt).sin() * (k * a).cos() + (0.7 * k * k + salt).cos() * (k * a).sin()) / (1.0 + 0.2 * k * k)
            })
            .sum::<f64>()
            + 0.3 * salt.sin()
    })
}

fn operator_identities() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [64, 128, 256] {
        let g = grid(n);
        for salt in [0.1, 1.7, 4.2] {
            let f = generic_field(&g, salt);
            let zero_mean = &f - &PeriodicField::constant(&g, f.mean());
            worst = worst.max((&f.hilbert().hilbert() + &zero_mean).max_abs());
            worst = worst.max((&zero_mean.antiderivative().unwrap().derivative(1) - &zero_mean).max_abs());
            worst = worst.max((&f.fractional_lambda(1.0) - &f.derivative(1).hilbert()).max_abs());

            let flat = InterfaceState::new(PeriodicField::zeros(&g), f.clone(), 0.0).unwrap();
            let ops = CurveOps::new(&flat).unwrap();
            let p = params(0.02, 0.05);
            let cf = ComplexPeriodicField::from_parts(&f, &generic_field(&g, salt + 2.0));
            worst = worst.max(ops.k(&cf).max_abs());
            worst = worst.max(ops.j(&f).max_abs());
            worst = worst.max(ops.s(&f).max_abs());
            worst = worst.max(ops.t(&p, &f).max_abs());
            worst = worst.max(ops.m_conj(&f).max_abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-12 && secs < 10.0, format!("max deviation {worst:.2e}, {secs:.2} s"))
}

fn birkhoff_rott_vs_pv() -> Outcome {
    let st = sample_state(256, 0.2, f64::cos);
    let ops = CurveOps::new(&st).unwrap();
    let err = (&ops.birkhoff_rott_conj(&st.gamma) - &pv_birkhoff_rott_conj(&st, 4)).max_abs();
    outcome(err < 1e-8, format!("max |W - W_pv| = {err:.2e} at N=256"))
}

fn w_alpha_consistency() -> Outcome {
    let st = sample_state(256, 0.2, f64::cos);
    let ops = CurveOps::new(&st).unwrap();
    let l = st.length;
    let w = ops.birkhoff_rott(&st.gamma);
    let m = ops.m_term(&st.gamma);
    let (t, n) = frame(&st.theta);
    let ta = st.theta.derivative(1);
    let a = st.gamma.derivative(1).hilbert() * (PI / l);
    let b = (&st.gamma * &ta).hilbert() * (PI / l);
    let wx = &a * &n.x - &b * &t.x + &m.x;
    let wy = &a * &n.y - &b * &t.y + &m.y;
    let err = (&w.x.derivative(1) - &wx).max_abs().max((&w.y.derivative(1) - &wy).max_abs());
    outcome(err < 1e-7, format!("max |W_alpha - decomposition| = {err:.2e} at N=256"))
}

fn equilibrium_fixed_point() -> Outcome {
    let g = grid(64);
    let p = params(0.01, 0.01);
    let mut s = InterfaceState::equilibrium(&g);
    let dt = stable_dt(&p, s.length, &g, 0.5);
    for _ in 0..1000 {
        s = step_rk4(&s, &p, dt).unwrap();
    }
    let worst = s.theta.max_abs().max(s.gamma.max_abs());
    outcome(worst <= DEFAULT_FILTER_FLOOR, format!("max |theta|,|gamma| = {worst:.2e} after 1000 steps"))
}

/// ω from the 2×2 linear system `(θ̂, γ̂)' = [[0, a], [−b, 0]](θ̂, γ̂)` about the flat state.
fn dispersion_oracle(p: &PhysParams, k: f64) -> f64 {
    let l = 2.0 * PI;
    let rho_sum = p.rho1 + p.rho2;
    let lambda = 4.0 * p.tau * PI / (l * rho_sum);
    let a_bar = 8.0 * PI.powi(3) / (l.powi(3) * rho_sum);
    let mass = (2.0 * PI / (l * rho_sum)) * (2.0 * PI * p.rho0 / l);
    let a = 2.0 * PI * PI / (l * l) * k;
    let b = (lambda * k * k + p.sigma * a_bar * k.powi(4)) / (1.0 + mass * k);
    // Characteristic polynomial μ² + ab = 0.
    let (trace, det) = (0.0, a * b);
    let disc = trace * trace / 4.0 - det;
    assert!(disc < 0.0);
    (-disc).sqrt()
}

/// Frequency from successive zero crossings of the `cos kα` coefficient of γ.
fn measured_frequency(p: &PhysParams, k: usize) -> f64 {
    let g = grid(32);
    let amp = 1e-6;
    let mut s = InterfaceState::new(PeriodicField::zeros(&g), PeriodicField::from_fn(&g, |a| amp * (k as f64 * a).cos()), 0.0).unwrap();
    let coefficient = |s: &InterfaceState| s.gamma.mode(k as i64).re * 2.0;
    let omega_guess = dispersion_oracle(p, k as f64);
    let dt = stable_dt(p, s.length, &g, 0.25).min(0.01 / omega_guess);
    let mut crossings = vec![];
    let (mut t_prev, mut c_prev) = (0.0, coefficient(&s));
    while crossings.len() < 3 {
        s = step_rk4(&s, p, dt).unwrap();
        let c = coefficient(&s);
        if c_prev.signum() != c.signum() {
            crossings.push(t_prev + dt * c_prev / (c_prev - c));
        }
        t_prev = s.time;
        c_prev = c;
        assert!(s.time < 100.0 / omega_guess, "no oscillation");
    }
    2.0 * PI / (crossings[2] - crossings[0])
}

fn linear_dispersion() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = vec![];
    for (sigma, rho0) in [(0.0, 0.0), (0.01, 0.01)] {
        let p = params(sigma, rho0);
        for k in [1usize, 2, 4] {
            let exact = dispersion_oracle(&p, k as f64);
            let got = measured_frequency(&p, k);
            let rel = (got - exact).abs() / exact;
            worst = worst.max(rel);
            parts.push(format!("(σ={sigma},k={k}) {got:.6}/{exact:.6}"));
        }
    }
    outcome(worst < 1e-3, format!("max relative error {worst:.2e}; {}", parts.join(", ")))
}

fn ladder_initial() -> InitialCondition {
    InitialCondition {
        theta: FourierSeries { sin: vec![0.1], ..Default::default() },
        gamma: FourierSeries { cos: vec![0.1], ..Default::default() },
    }
}

fn ladder() -> SweepResult {
    let mut pairs: Vec<(f64, f64)> = (0..6).map(|k| (1e-2 * 0.5f64.powi(k), 1e-2 * 0.5f64.powi(k))).collect();
    pairs.push((0.0, 0.0));
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_ladder");
    let config = SweepConfig {
        initial: ladder_initial(),
        base: params(0.0, 0.0),
        pairs,
        grid_size: 128,
        t_end: 0.25,
        policy: StepPolicy { probe_trials: 1, probe_seed: 2024, monitor_cadence: 10, ..Default::default() },
        output_dir: Some(out),
    };
    sweep(&config).unwrap()
}

fn solvability(ladder: &SweepResult) -> Outcome {
    let mut max_probe: f64 = 0.0;
    let mut max_residual: f64 = 0.0;
    let mut steps = 0;
    let mut unprobed = 0;
    for t in &ladder.trajectories {
        for r in &t.steps {
            steps += 1;
            match r.probe_norm {
                Some(p) => max_probe = max_probe.max(p),
                None => unprobed += 1,
            }
            max_residual = max_residual.max(r.residual);
        }
    }
    let massless = PhysParams::new(0.0, 0.0, TAU, 0.75, 0.25, 0.0).unwrap();
    let mut massless_probe: f64 = 0.0;
    for st in [ladder_initial().state(&grid(128)).unwrap(), common::generic_state(128)] {
        let r = CurveOps::new(&st).unwrap().probe_t_norm(&massless, 3, 11);
        massless_probe = massless_probe.max(r.estimated_norm);
    }
    let all_completed = ladder.runs.iter().all(|r| r.failure.is_none());
    outcome(
        all_completed && unprobed == 0 && max_probe < 1.0 && max_residual < 1e-11 && massless_probe < 1.0,
        format!("{steps} steps: max probe {max_probe:.3e}, max residual {max_residual:.2e}; massless A=0.5 probe {massless_probe:.3e}"),
    )
}

fn energy_bound(ladder: &SweepResult) -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for (i, t) in ladder.trajectories.iter().enumerate() {
        let series: Vec<(f64, f64)> = t.diagnostics.iter().map(|d| (d.time, d.e_total)).collect();
        let nonneg = series.iter().all(|&(_, e)| e >= 0.0 && e.is_finite());
        let fit = fit_log_bound(&series);
        let ok = match &fit {
            Ok(f) => series.iter().all(|&(t, e)| e - f.bound(t) <= 1e-8 * (1.0 + e)),
            Err(_) => false,
        };
        pass &= nonneg && ok && t.completed();
        let (s, r) = ladder.pairs[i];
        parts.push(match fit {
            Ok(f) => format!("({s:.2e},{r:.2e}) viol {:.1e}", f.max_violation),
            Err(e) => format!("({s:.2e},{r:.2e}) {e}"),
        });
    }
    outcome(pass, parts.join(", "))
}

fn cauchy_rate(ladder: &SweepResult) -> Outcome {
    match hydrosheet::limit_lab::cauchy_rate(ladder) {
        Ok(f) => outcome(
            (0.8..=1.2).contains(&f.slope) && f.r_squared > 0.95,
            format!("slope {:.4}, r² {:.4} over {} pairs", f.slope, f.r_squared, f.points),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn limit_agreement(ladder: &SweepResult) -> Outcome {
    let ladder_idx: Vec<usize> = (0..ladder.pairs.len()).filter(|&i| i != ladder.zero_index).collect();
    let mut pass = true;
    let mut ratio = f64::NAN;
    for (c, d) in ladder.limit_distances.iter().enumerate() {
        let ds: Vec<Option<f64>> = ladder_idx.iter().map(|&i| d[i]).collect();
        if ds.iter().any(Option::is_none) {
            pass = false;
            continue;
        }
        let ds: Vec<f64> = ds.into_iter().flatten().collect();
        pass &= ds.windows(2).all(|w| w[1] <= w[0]);
        if c == ladder.limit_distances.len() - 1 {
            ratio = ds[ds.len() - 1] / ds[0];
        }
    }
    pass &= ratio < 0.1;
    let last: Vec<String> = ladder.limit_distances.last().unwrap().iter().flatten().map(|d| format!("{d:.2e}")).collect();
    outcome(pass, format!("d_5/d_0 = {ratio:.4}; d_k at t_end = [{}]", last.join(", ")))
}

fn self_convergence() -> Outcome {
    let p = params(1e-3, 1e-3);
    let t_end = 0.25;
    let fine = grid(256);
    let coarse = grid(128);
    let init = ladder_initial();
    let dt = stable_dt(&p, init.state(&fine).unwrap().length, &fine, 0.5);
    let steps = (t_end / dt).ceil();
    let policy = StepPolicy { dt: TimeStep::Fixed(t_end / steps), monitor_cadence: 1_000_000, ..Default::default() };
    let a = run(&init.state(&coarse).unwrap(), &p, &policy, t_end).unwrap();
    let b = run(&init.state(&fine).unwrap(), &p, &policy, t_end).unwrap();
    if !(a.completed() && b.completed()) {
        return outcome(false, format!("run stopped: {:?} {:?}", a.failure, b.failure));
    }
    let bf = b.last();
    let down = InterfaceState { theta: bf.theta.resample(&coarse), gamma: bf.gamma.resample(&coarse), length: bf.length, time: bf.time };
    let d = difference_norm(a.last(), &down).unwrap();
    let residual = a.steps.iter().chain(&b.steps).map(|r| r.residual).fold(0.0, f64::max);
    outcome(d < 1e-6, format!("difference norm {d:.2e} ({} steps each, max residual {residual:.1e})", steps as usize))
}

fn main() {
    let mut results: Vec<(&str, Outcome, f64)> = vec![];
    let mut check = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        println!("[{}] {name}: {} ({secs:.1} s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o, secs));
    };
    check("operator identities", &mut operator_identities);
    check("Birkhoff-Rott vs PV quadrature", &mut birkhoff_rott_vs_pv);
    check("W_alpha consistency", &mut w_alpha_consistency);
    check("equilibrium fixed point", &mut equilibrium_fixed_point);
    check("linearized dispersion", &mut linear_dispersion);

    let start = Instant::now();
    let shared = catch_unwind(ladder);
    println!("ladder sweep: {:.1} s", start.elapsed().as_secs_f64());
    match &shared {
        Ok(l) => {
            check("gamma_t solvability", &mut || solvability(l));
            check("energy bound", &mut || energy_bound(l));
            check("Cauchy rate", &mut || cauchy_rate(l));
            check("limit agreement", &mut || limit_agreement(l));
        }
        Err(_) => {
            for name in ["gamma_t solvability", "energy bound", "Cauchy rate", "limit agreement"] {
                check(name, &mut || outcome(false, "ladder sweep panicked".into()));
            }
        }
    }
    check("self-convergence in N", &mut self_convergence);

    let failed = results.iter().filter(|r| !r.1.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
