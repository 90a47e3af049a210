//! Right-hand side of the (θ, γ, L) system.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{InterfaceState, PhysParams, Vector2Field, CLOSURE_TOLERANCE};
use crate::singular_ops::{d2_apply, d2_inverse, hilbert_commutator, CurveOps, OperatorProbeReport};
use crate::spectral::{hilbert_commutator_c, ComplexPeriodicField, PeriodicField};

pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITERATIONS: usize = 200;
/// Probe estimate above which the fixed-point update is damped.
pub const DAMPING_THRESHOLD: f64 = 0.9;
pub const DAMPING_FACTOR: f64 = 0.5;

/// Velocities and other γ_t-independent kinematic quantities of a state.
#[derive(Clone, Debug)]
pub struct Kinematics {
    /// Conjugated complex Birkhoff–Rott velocity.
    pub w_conj: ComplexPeriodicField,
    /// `U = W·n`.
    pub u: PeriodicField,
    /// `W·t`.
    pub w_t: PeriodicField,
    pub m_conj: ComplexPeriodicField,
    pub m_n: PeriodicField,
    pub m_t: PeriodicField,
    pub v_w: PeriodicField,
    pub v: PeriodicField,
    pub length_t: f64,
    pub theta_t: PeriodicField,
    pub z_t: ComplexPeriodicField,
    pub z_t_alpha: ComplexPeriodicField,
}

impl Kinematics {
    pub fn new(state: &InterfaceState, ops: &CurveOps) -> Result<Self> {
        let l = state.length;
        let gamma = &state.gamma;
        let theta_a = ops.theta_alpha();

        let w_conj = ops.birkhoff_rott_conj(gamma);
        let (u, w_t) = ops.project_conj(&w_conj);
        let m_conj = ops.m_conj(gamma);
        let (m_n, m_t) = ops.project_conj(&m_conj);

        let v_w = ((gamma * theta_a).hilbert() * (PI / l) - m_t.project_zero_mean())
            .project_zero_mean()
            .antiderivative()?;
        let stretch = theta_a * &u;
        let length_t = -stretch.integral();
        let v = stretch.project_zero_mean().antiderivative()? + w_t.mean();

        let theta_t = gamma.derivative(1).hilbert() * (2.0 * PI * PI / (l * l))
            + (&v_w * theta_a + &m_n) * (2.0 * PI / l);

        let z_t = ComplexPeriodicField::from_parts(&v, &u) * ops.z_alpha() * (1.0 / ops.s_alpha());
        let z_t_alpha = z_t.derivative(1);
        Ok(Self { w_conj, u, w_t, m_conj, m_n, m_t, v_w, v, length_t, theta_t, z_t, z_t_alpha })
    }

    pub fn birkhoff_rott(&self) -> Vector2Field {
        Vector2Field::from_conjugate(&self.w_conj)
    }

    pub fn m(&self) -> Vector2Field {
        Vector2Field::from_conjugate(&self.m_conj)
    }
}

/// The γ_t-independent remainder collections.
#[derive(Clone, Debug)]
pub struct RemainderBundle {
    pub m: Vector2Field,
    pub r1: PeriodicField,
    pub r3: PeriodicField,
    pub r5: PeriodicField,
    pub rt1: PeriodicField,
    pub rt2: PeriodicField,
    pub r: PeriodicField,
}

#[derive(Clone, Debug)]
pub struct StateDerivative {
    pub theta_t: PeriodicField,
    pub gamma_t: PeriodicField,
    pub length_t: f64,
}

/// Outcome of the implicit γ_t solve.
#[derive(Clone, Debug)]
pub struct GammaSolve {
    pub gamma_t: PeriodicField,
    pub iterations: usize,
    /// `‖γ_t + D₂⁻¹Tγ_t − D₂⁻¹F‖₀ / (1 + ‖D₂⁻¹F‖₀)`.
    pub residual: f64,
    pub damping: f64,
}

/// Controls for one right-hand-side evaluation.
#[derive(Clone, Copy, Debug)]
pub struct RhsOptions {
    /// Random starts for the ‖D₂⁻¹T‖ probe; 0 disables probing.
    pub probe_trials: usize,
    pub probe_seed: u64,
    /// Largest `|⟨sin θ⟩|` accepted when building the curve.
    pub closure_tolerance: f64,
}

impl Default for RhsOptions {
    fn default() -> Self {
        Self { probe_trials: 0, probe_seed: 0, closure_tolerance: CLOSURE_TOLERANCE }
    }
}

#[derive(Clone, Debug)]
pub struct RhsReport {
    pub derivative: StateDerivative,
    pub iterations: usize,
    pub residual: f64,
    pub probe: Option<OperatorProbeReport>,
}

fn half_over_i() -> Complex64 {
    Complex64::new(0.0, -0.5)
}

/// `R₁`, the integrated-by-parts part of `s_α W_t·t` that does not involve γ_t.
pub fn r1_term(state: &InterfaceState, ops: &CurveOps, kin: &Kinematics) -> PeriodicField {
    let za = ops.z_alpha();
    let zt = &kin.z_t;
    let g = (&state.gamma / za).derivative(1);
    let a = za * zt * &ops.k(&g);
    let b = za * &ops.k(&(zt * &g));
    let c = za * &hilbert_commutator_c(zt, &(&g / za)) * half_over_i();
    a.re() - b.re() - c.re()
}

/// `R₃`, the γ_t-independent part of `W_αt·n` that is not in `R₄`.
pub fn r3_term(state: &InterfaceState, ops: &CurveOps, kin: &Kinematics) -> PeriodicField {
    let za = ops.z_alpha();
    let sa = ops.s_alpha();
    let zt = &kin.z_t;
    let zta = &kin.z_t_alpha;
    let za2 = za * za;
    let inv_za2 = za2.recip();
    let coef_k = &za2 * Complex64::new(0.0, 1.0 / sa);
    let coef_h = &za2 * (0.5 / sa);

    let g = (&state.gamma / za).derivative(1);
    let h1_a = (-(&state.gamma * zta) * &inv_za2).derivative(1);
    let q_a = (&g / za).derivative(1);

    let t1 = &coef_k * &ops.k(&h1_a);
    let t2 = &coef_h * &hilbert_commutator_c(&inv_za2, &(za * &h1_a));
    let t3 = &coef_h * &hilbert_commutator_c(&inv_za2, &(&g * zta));
    let t4 = &coef_k * &ops.k(&(&g * zta / za));
    let t5 = &coef_k * zt * &ops.k(&q_a);
    let t6 = &coef_k * &ops.k(&(zt * &q_a));
    let t7 = &coef_h * &hilbert_commutator_c(zt, &(&q_a / za));
    (t1 + t2 - t3 - t4 + t5 - t6 - t7).re()
}

pub fn assemble_remainders_with(
    state: &InterfaceState,
    params: &PhysParams,
    ops: &CurveOps,
    kin: &Kinematics,
) -> RemainderBundle {
    let l = state.length;
    let gamma = &state.gamma;
    let theta_a = ops.theta_alpha();
    let at = params.a_tilde();
    let a = params.atwood();
    let za = ops.z_alpha();
    let sa = ops.s_alpha();

    let gamma_a = gamma.derivative(1);
    let h_gamma_a = gamma_a.hilbert();
    let v_w_a = kin.v_w.derivative(1);
    let mt_sum = kin.m_t.project_zero_mean() + &kin.m_t;
    let gamma_theta_a = gamma * theta_a;

    let r1 = r1_term(state, ops, kin);
    let r3 = r3_term(state, ops, kin);

    let big_theta = (&kin.v_w * theta_a + &kin.m_n) * (2.0 * PI / l);
    let r5 = hilbert_commutator(&big_theta, &gamma_theta_a) * (-2.0 * PI / l)
        + &kin.v_w * &v_w_a * theta_a * (2.0 * PI / l)
        + &kin.v_w * &kin.m_n.derivative(1) * (2.0 * PI / l)
        - &mt_sum * &big_theta;

    let l2 = l * l;
    let l3 = l2 * l;
    let rt1 = (theta_a * gamma * &gamma_a * (2.0 * PI.powi(3) / l3)
        + hilbert_commutator(&h_gamma_a, &gamma_theta_a) * (4.0 * PI.powi(3) / l3)
        + &mt_sum * &h_gamma_a * (2.0 * PI * PI / l2)
        + &h_gamma_a * (PI * kin.length_t / l2))
        * (2.0 * at);

    let flux = gamma * &kin.z_t_alpha / za;
    let re_k = (za * &ops.k(&flux)).re();
    let re_h = (za * &hilbert_commutator_c(&za.recip(), &flux) * half_over_i()).re();
    let comm_gamma = hilbert_commutator(gamma, &h_gamma_a) * (PI * PI / l2);
    let h_mn = (gamma * &kin.m_n).hilbert() * (PI / l);
    let h_vw = (&kin.v_w * &gamma_theta_a).hilbert() * (PI / l);

    let sin_t = state.theta.map(f64::sin);
    let y_a = &sin_t * sa;
    let x_aa = -(&sin_t * theta_a) * sa;

    let rt2 = (theta_a * (-4.0 * PI * at / l)) * &(&comm_gamma + &h_vw + &h_mn + &re_k + &re_h - &r1)
        - (&kin.m_n * (kin.length_t / l) + &x_aa * (2.0 * PI * params.g / l) + &r3 + &r5) * (2.0 * at);

    let r = &v_w_a * gamma * (2.0 * PI / l)
        + (&comm_gamma
            + &h_mn
            + &re_k
            + hilbert_commutator(&kin.v_w, &gamma_theta_a) * (PI / l)
            + &re_h
            + &kin.v_w * &kin.m_t
            - &y_a * params.g
            - &r1)
            * (2.0 * a);

    RemainderBundle { m: kin.m(), r1, r3, r5, rt1, rt2, r }
}

pub fn assemble_f_with(
    state: &InterfaceState,
    params: &PhysParams,
    ops: &CurveOps,
    kin: &Kinematics,
    bundle: &RemainderBundle,
) -> PeriodicField {
    let l = state.length;
    let theta = &state.theta;
    let gamma = &state.gamma;
    let rho = params.sheet_density(l);
    let at = params.a_tilde();
    let a = params.atwood();
    let a_bar = params.a_bar(l);
    let theta_a = ops.theta_alpha();
    let theta_aa = theta.derivative(2);

    let mut f = &theta_aa * params.lambda(l)
        + (&(&kin.v_w * (2.0 * PI / l)) - &(gamma * (4.0 * a * PI * PI / (l * l)))) * &gamma.derivative(1)
        + &bundle.r;
    if params.sigma != 0.0 {
        f = f - (theta.derivative(4) + theta_a * theta_a * &theta_aa * 1.5) * (params.sigma * a_bar);
    }
    if rho != 0.0 {
        f = f - &kin.v_w * &kin.v_w * &theta_aa * (4.0 * PI * rho * at / l)
            - &kin.v_w * &gamma.derivative(2).hilbert() * (4.0 * rho * at * PI * PI / (l * l))
            + (&bundle.rt1 + &bundle.rt2) * rho;
    }
    f
}

/// Fixed-point solve of `D₂γ_t + Tγ_t = F`.
pub fn solve_gamma_t_with(
    state: &InterfaceState,
    params: &PhysParams,
    ops: &CurveOps,
    f: &PeriodicField,
    damping: f64,
) -> Result<GammaSolve> {
    let l = state.length;
    let rhs = d2_inverse(params, l, f);
    let scale = 1.0 + rhs.sobolev_norm(0.0);
    let tol = FIXED_POINT_TOLERANCE * (1.0 + f.sobolev_norm(0.0));
    let mut current = rhs.clone();
    let mut update = f64::INFINITY;
    for it in 1..=FIXED_POINT_MAX_ITERATIONS {
        let target = &rhs - &d2_inverse(params, l, &ops.t(params, &current));
        let next = if damping == 1.0 { target } else { &current * (1.0 - damping) + &target * damping };
        update = (&next - &current).sobolev_norm(0.0);
        current = next;
        if !update.is_finite() {
            break;
        }
        if update < tol {
            let residual_field = &current + &d2_inverse(params, l, &ops.t(params, &current)) - &rhs;
            return Ok(GammaSolve {
                gamma_t: current,
                iterations: it,
                residual: residual_field.sobolev_norm(0.0) / scale,
                damping,
            });
        }
    }
    Err(Error::FixedPointDiverged { iterations: FIXED_POINT_MAX_ITERATIONS, update })
}

pub fn rhs_with(state: &InterfaceState, params: &PhysParams, options: &RhsOptions) -> Result<RhsReport> {
    let ops = CurveOps::with_closure_tolerance(state, options.closure_tolerance)?;
    rhs_with_ops(state, params, &ops, options)
}

pub fn rhs_with_ops(state: &InterfaceState, params: &PhysParams, ops: &CurveOps, options: &RhsOptions) -> Result<RhsReport> {
    let kin = Kinematics::new(state, ops)?;
    let bundle = assemble_remainders_with(state, params, ops, &kin);
    let f = assemble_f_with(state, params, ops, &kin, &bundle);
    let probe = (options.probe_trials > 0).then(|| ops.probe_t_norm(params, options.probe_trials, options.probe_seed));
    let damping = match probe {
        Some(p) if p.estimated_norm >= DAMPING_THRESHOLD => DAMPING_FACTOR,
        _ => 1.0,
    };
    let solve = solve_gamma_t_with(state, params, ops, &f, damping)?;
    Ok(RhsReport {
        derivative: StateDerivative { theta_t: kin.theta_t, gamma_t: solve.gamma_t, length_t: kin.length_t },
        iterations: solve.iterations,
        residual: solve.residual,
        probe,
    })
}

pub fn rhs(state: &InterfaceState, params: &PhysParams) -> Result<StateDerivative> {
    Ok(rhs_with(state, params, &RhsOptions::default())?.derivative)
}

fn kinematics(state: &InterfaceState) -> Result<(CurveOps, Kinematics)> {
    let ops = CurveOps::new(state)?;
    let kin = Kinematics::new(state, &ops)?;
    Ok((ops, kin))
}

pub fn normal_velocity(state: &InterfaceState) -> Result<PeriodicField> {
    Ok(kinematics(state)?.1.u)
}

pub fn length_rate(state: &InterfaceState) -> Result<f64> {
    Ok(kinematics(state)?.1.length_t)
}

pub fn tangential_correction(state: &InterfaceState) -> Result<PeriodicField> {
    Ok(kinematics(state)?.1.v_w)
}

pub fn full_tangential(state: &InterfaceState) -> Result<PeriodicField> {
    Ok(kinematics(state)?.1.v)
}

pub fn theta_rhs(state: &InterfaceState) -> Result<PeriodicField> {
    Ok(kinematics(state)?.1.theta_t)
}

pub fn z_time_derivative(state: &InterfaceState) -> Result<ComplexPeriodicField> {
    Ok(kinematics(state)?.1.z_t)
}

pub fn assemble_remainders(state: &InterfaceState, params: &PhysParams) -> Result<RemainderBundle> {
    let (ops, kin) = kinematics(state)?;
    Ok(assemble_remainders_with(state, params, &ops, &kin))
}

pub fn assemble_f(state: &InterfaceState, params: &PhysParams) -> Result<PeriodicField> {
    let (ops, kin) = kinematics(state)?;
    let bundle = assemble_remainders_with(state, params, &ops, &kin);
    Ok(assemble_f_with(state, params, &ops, &kin, &bundle))
}

pub fn solve_gamma_t(state: &InterfaceState, params: &PhysParams, f: &PeriodicField) -> Result<GammaSolve> {
    let ops = CurveOps::new(state)?;
    solve_gamma_t_with(state, params, &ops, f, 1.0)
}

/// `D₂γ_t + Tγ_t`; the operator inverted by [`solve_gamma_t`].
pub fn implicit_operator(state: &InterfaceState, params: &PhysParams, ops: &CurveOps, gamma_t: &PeriodicField) -> PeriodicField {
    d2_apply(params, state.length, gamma_t) + ops.t(params, gamma_t)
}
