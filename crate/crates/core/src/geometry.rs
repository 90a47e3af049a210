//! Curve reconstruction from the tangent angle, sheet strength and length.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ComplexPeriodicField, Grid, PeriodicField};

/// Default bound on `|⟨sin θ⟩|`.
pub const CLOSURE_TOLERANCE: f64 = 1e-10;

/// `∫cos θ` below this is treated as a degenerate (non graph-like) curve.
pub const DEGENERATE_THRESHOLD: f64 = 1e-8;

/// The evolved unknowns at one instant.
#[derive(Clone, Debug)]
pub struct InterfaceState {
    pub theta: PeriodicField,
    pub gamma: PeriodicField,
    /// Length of one period; evolved alongside θ and audited against [`length_of`].
    pub length: f64,
    pub time: f64,
}

impl InterfaceState {
    /// Builds a state whose length is computed from θ.
    pub fn new(theta: PeriodicField, gamma: PeriodicField, time: f64) -> Result<Self> {
        theta.grid().check(gamma.grid())?;
        let length = length_of(&theta)?;
        Ok(Self { theta, gamma, length, time })
    }

    /// Flat interface with zero sheet strength.
    pub fn equilibrium(grid: &Grid) -> Self {
        Self {
            theta: PeriodicField::zeros(grid),
            gamma: PeriodicField::zeros(grid),
            length: 2.0 * PI,
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }

    /// `s_α = L / 2π`.
    pub fn s_alpha(&self) -> f64 {
        self.length / (2.0 * PI)
    }

    /// `z_α = s_α e^{iθ}`.
    pub fn z_alpha(&self) -> ComplexPeriodicField {
        let s = self.s_alpha();
        ComplexPeriodicField::from_raw(
            self.grid().clone(),
            self.theta.values().iter().map(|&t| Complex64::from_polar(s, t)).collect(),
        )
    }

    /// Relative disagreement between the stored length and `length_of(θ)`.
    pub fn length_drift(&self) -> Result<f64> {
        Ok((self.length - length_of(&self.theta)?).abs() / self.length)
    }
}

/// Material constants of the two fluids and the elastic sheet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub rho0: f64,
    pub sigma: f64,
    pub tau: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub g: f64,
}

impl PhysParams {
    pub fn new(rho0: f64, sigma: f64, tau: f64, rho1: f64, rho2: f64, g: f64) -> Result<Self> {
        let p = Self { rho0, sigma, tau, rho1, rho2, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.rho0, self.sigma, self.tau, self.rho1, self.rho2, self.g];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if self.rho0 < 0.0 || self.sigma < 0.0 {
            return Err(Error::InvalidParams("rho0 and sigma must be nonnegative".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParams("tau must be positive".into()));
        }
        if self.rho1 < 0.0 || self.rho2 < 0.0 || self.rho1 + self.rho2 <= 0.0 {
            return Err(Error::InvalidParams("fluid densities must be nonnegative with positive sum".into()));
        }
        Ok(())
    }

    /// Same fluids and tension with a different bending modulus and sheet mass.
    pub fn with_sheet(&self, sigma: f64, rho0: f64) -> Self {
        Self { sigma, rho0, ..*self }
    }

    /// Atwood number `A = (ρ₁−ρ₂)/(ρ₁+ρ₂)`.
    pub fn atwood(&self) -> f64 {
        (self.rho1 - self.rho2) / (self.rho1 + self.rho2)
    }

    /// `Ã = 1/(ρ₁+ρ₂)`.
    pub fn a_tilde(&self) -> f64 {
        1.0 / (self.rho1 + self.rho2)
    }

    /// Density of the deformed sheet, `ρ = ρ₀/s_α`.
    pub fn sheet_density(&self, length: f64) -> f64 {
        self.rho0 * 2.0 * PI / length
    }

    /// `Ā = 8π³/(L³(ρ₁+ρ₂))`.
    pub fn a_bar(&self, length: f64) -> f64 {
        8.0 * PI.powi(3) * self.a_tilde() / length.powi(3)
    }

    /// `λ = 4τπ/(L(ρ₁+ρ₂))`.
    pub fn lambda(&self, length: f64) -> f64 {
        4.0 * self.tau * PI * self.a_tilde() / length
    }
}

/// Pair of real fields `(x, y)`.
#[derive(Clone, Debug)]
pub struct Vector2Field {
    pub x: PeriodicField,
    pub y: PeriodicField,
}

impl Vector2Field {
    pub fn dot(&self, other: &Self) -> PeriodicField {
        &self.x * &other.x + &self.y * &other.y
    }

    /// `(x, y)` from its conjugated complexification `x − iy`.
    pub fn from_conjugate(c: &ComplexPeriodicField) -> Self {
        Self { x: c.re(), y: -c.im() }
    }

    /// `x + iy`.
    pub fn complexify(&self) -> ComplexPeriodicField {
        ComplexPeriodicField::from_parts(&self.x, &self.y)
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }
}

/// `L = 4π² / ∫cos θ`.
pub fn length_of(theta: &PeriodicField) -> Result<f64> {
    let integral = theta.map(f64::cos).integral();
    if integral <= DEGENERATE_THRESHOLD {
        return Err(Error::DegenerateCurve(integral));
    }
    Ok(4.0 * PI * PI / integral)
}

/// `⟨sin θ⟩`; zero for a horizontally periodic curve.
pub fn closure_defect(theta: &PeriodicField) -> f64 {
    theta.map(f64::sin).mean()
}

/// Curve positions relative to `z(0)`, checked against the default closure tolerance.
pub fn reconstruct_zd(state: &InterfaceState) -> Result<ComplexPeriodicField> {
    reconstruct_zd_with_tolerance(state, CLOSURE_TOLERANCE)
}

/// `z_d(α) = ∫₀^α s_α e^{iθ}` realized as `α` plus the mean-zero antiderivative of
/// `s_α(e^{iθ} − ⟨e^{iθ}⟩)`, so that `z_d(α+2π) = z_d(α) + 2π` holds exactly.
pub fn reconstruct_zd_with_tolerance(state: &InterfaceState, closure_tolerance: f64) -> Result<ComplexPeriodicField> {
    let defect = closure_defect(&state.theta);
    if defect.abs() > closure_tolerance {
        return Err(Error::ClosureViolated(defect));
    }
    let grid = state.grid();
    let oscillating = state.z_alpha().project_zero_mean().antiderivative()?;
    let origin = oscillating.values()[0];
    Ok(ComplexPeriodicField::from_raw(
        grid.clone(),
        grid.nodes()
            .into_iter()
            .zip(oscillating.values())
            .map(|(a, &w)| Complex64::new(a, 0.0) + w - origin)
            .collect(),
    ))
}

/// Unit tangent `(cos θ, sin θ)` and normal `(−sin θ, cos θ)`.
pub fn frame(theta: &PeriodicField) -> (Vector2Field, Vector2Field) {
    let c = theta.map(f64::cos);
    let s = theta.map(f64::sin);
    let tangent = Vector2Field { x: c.clone(), y: s.clone() };
    let normal = Vector2Field { x: -s, y: c };
    (tangent, normal)
}

/// Minimum of `|z_d(α)−z_d(α′)| / |α−α′|` over node pairs, including pairs one
/// period apart. Returns 0 when two nodes coincide.
pub fn chord_arc_min(zd: &ComplexPeriodicField) -> f64 {
    let grid = zd.grid();
    let n = grid.len();
    let z = zd.values();
    let two_pi = 2.0 * PI;
    let mut best = f64::INFINITY;
    for j in 0..n {
        for m in 0..n {
            for p in -1i32..=1 {
                if j == m && p == 0 {
                    continue;
                }
                let shift = two_pi * p as f64;
                let arc = grid.node(j) + shift - grid.node(m);
                let chord = (z[j] + shift - z[m]).norm();
                best = best.min(chord / arc.abs());
            }
        }
    }
    best
}

/// `κ = θ_α / s_α`.
pub fn curvature(state: &InterfaceState) -> PeriodicField {
    state.theta.derivative(1) * (1.0 / state.s_alpha())
}
