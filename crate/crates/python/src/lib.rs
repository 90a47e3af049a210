//! Python bindings. Fields cross the boundary as plain lists of nodal values.

use std::collections::HashMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hydrosheet_core::diagnostics;
use hydrosheet_core::geometry::{InterfaceState, PhysParams};
use hydrosheet_core::singular_ops;
use hydrosheet_core::spectral::{Grid, PeriodicField};
use hydrosheet_core::timestepper;

fn err(e: hydrosheet_core::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

fn state(theta: Vec<f64>, gamma: Vec<f64>) -> hydrosheet_core::Result<InterfaceState> {
    let grid = Grid::new(theta.len())?;
    InterfaceState::new(PeriodicField::new(&grid, theta)?, PeriodicField::new(&grid, gamma)?, 0.0)
}

fn params(sigma: f64, rho0: f64, tau: f64, rho1: f64, rho2: f64, g: f64) -> hydrosheet_core::Result<PhysParams> {
    PhysParams::new(rho0, sigma, tau, rho1, rho2, g)
}

/// Energy functionals of one state, keyed `E0`..`E7`, `E_total`, `chord_arc_min`, `closure_defect`.
#[pyfunction]
#[pyo3(signature = (theta, gamma, sigma, rho0, tau=1.0, rho1=1.0, rho2=0.0, g=0.0, s=4))]
#[allow(clippy::too_many_arguments)]
pub fn energy(theta: Vec<f64>, gamma: Vec<f64>, sigma: f64, rho0: f64, tau: f64, rho1: f64, rho2: f64, g: f64, s: u32) -> PyResult<HashMap<String, f64>> {
    let st = state(theta, gamma).map_err(err)?;
    let r = diagnostics::energy_report(&st, &params(sigma, rho0, tau, rho1, rho2, g).map_err(err)?, s).map_err(err)?;
    let mut out: HashMap<String, f64> = [r.e0, r.e1, r.e2, r.e3, r.e4, r.e5, r.e6, r.e7]
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("E{i}"), *v))
        .collect();
    out.insert("E_total".into(), r.e_total);
    out.insert("chord_arc_min".into(), r.chord_arc_min);
    out.insert("closure_defect".into(), r.closure_defect);
    Ok(out)
}

/// `‖θ_a−θ_b‖₂ + ‖γ_a−γ_b‖_{3/2}` between two states on the same grid.
#[pyfunction]
pub fn difference_norm(theta_a: Vec<f64>, gamma_a: Vec<f64>, theta_b: Vec<f64>, gamma_b: Vec<f64>) -> PyResult<f64> {
    let a = state(theta_a, gamma_a).map_err(err)?;
    let b = state(theta_b, gamma_b).map_err(err)?;
    diagnostics::difference_norm(&a, &b).map_err(err)
}

/// Fits `E(t) ≤ c1·exp(c2·exp(c3·t))`; returns `(c1, c2, c3, max_violation)`.
#[pyfunction]
pub fn fit_log_bound(times: Vec<f64>, values: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    if times.len() != values.len() {
        return Err(PyValueError::new_err("times and values differ in length"));
    }
    let series: Vec<(f64, f64)> = times.into_iter().zip(values).collect();
    let f = diagnostics::fit_log_bound(&series).map_err(err)?;
    Ok((f.c1, f.c2, f.c3, f.max_violation))
}

/// Estimated norm of the preconditioned γ_t operator at a state.
#[pyfunction]
#[pyo3(signature = (theta, gamma, sigma, rho0, tau=1.0, rho1=1.0, rho2=0.0, g=0.0, trials=8, seed=0))]
#[allow(clippy::too_many_arguments)]
pub fn probe_norm(theta: Vec<f64>, gamma: Vec<f64>, sigma: f64, rho0: f64, tau: f64, rho1: f64, rho2: f64, g: f64, trials: usize, seed: u64) -> PyResult<f64> {
    let st = state(theta, gamma).map_err(err)?;
    let p = params(sigma, rho0, tau, rho1, rho2, g).map_err(err)?;
    Ok(singular_ops::probe_t_norm(&st, &p, trials, seed).map_err(err)?.estimated_norm)
}

/// Linearized frequency of mode `k` about the flat state of period length `length`.
#[pyfunction]
#[pyo3(signature = (k, length, sigma, rho0, tau=1.0, rho1=1.0, rho2=0.0, g=0.0))]
#[allow(clippy::too_many_arguments)]
pub fn linear_frequency(k: u64, length: f64, sigma: f64, rho0: f64, tau: f64, rho1: f64, rho2: f64, g: f64) -> PyResult<f64> {
    Ok(timestepper::linear_frequency(&params(sigma, rho0, tau, rho1, rho2, g).map_err(err)?, length, k))
}

/// Runs the command-line front end with `argv` (without the program name); returns the exit status.
#[pyfunction]
pub fn run_cli(argv: Vec<String>) -> i32 {
    hydrosheet_core::cli::parse_and_dispatch(std::iter::once("hydrosheet".to_string()).chain(argv))
}

#[pymodule]
fn hydrosheet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(difference_norm, m)?)?;
    m.add_function(wrap_pyfunction!(fit_log_bound, m)?)?;
    m.add_function(wrap_pyfunction!(probe_norm, m)?)?;
    m.add_function(wrap_pyfunction!(linear_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
