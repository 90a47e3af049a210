#![allow(dead_code)]

use std::f64::consts::PI;

use hydrosheet::evolution::Kinematics;
use hydrosheet::geometry::{reconstruct_zd_with_tolerance, InterfaceState, PhysParams};
use hydrosheet::singular_ops::CurveOps;
use hydrosheet::spectral::{ComplexPeriodicField, Grid, PeriodicField};
use num_complex::Complex64;

pub fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

/// θ with odd symmetry (closed curve), generic γ.
pub fn generic_state(n: usize) -> InterfaceState {
    let g = grid(n);
    let theta = PeriodicField::from_fn(&g, |a| 0.2 * a.sin() + 0.05 * (2.0 * a).sin());
    let gamma = PeriodicField::from_fn(&g, |a| a.cos() + 0.3 * (2.0 * a).sin() + 0.1);
    InterfaceState::new(theta, gamma, 0.0).unwrap()
}

pub fn sample_state(n: usize, eps: f64, gamma: impl Fn(f64) -> f64) -> InterfaceState {
    let g = grid(n);
    InterfaceState::new(PeriodicField::from_fn(&g, |a| eps * a.sin()), PeriodicField::from_fn(&g, gamma), 0.0).unwrap()
}

/// Unequal densities with ρ₁+ρ₂ ≠ 1 so that A, Ã and Ā are all distinct.
pub fn generic_params() -> PhysParams {
    PhysParams::new(0.05, 0.02, 1.0, 0.7, 0.5, 0.0).unwrap()
}

/// Birkhoff–Rott velocity `W₁ − iW₂` by the alternating-point trapezoid rule on
/// a grid refined by `refine` (even), using spectral interpolation of γ and z.
pub fn pv_birkhoff_rott_conj(state: &InterfaceState, refine: usize) -> ComplexPeriodicField {
    assert!(refine % 2 == 0);
    let coarse = state.grid();
    let n = coarse.len();
    let fine = grid(n * refine);
    let zd = reconstruct_zd_with_tolerance(state, 1e-6).unwrap();
    let linear = ComplexPeriodicField::from_fn(coarse, |a| Complex64::new(a, 0.0));
    let periodic = (&zd - &linear).resample(&fine);
    let z: Vec<Complex64> = (0..fine.len()).map(|m| periodic.values()[m] + fine.node(m)).collect();
    let gamma = state.gamma.resample(&fine);
    let m_total = fine.len();
    let weight = (2.0 * 2.0 * PI / m_total as f64) / Complex64::new(0.0, 4.0 * PI);
    let out = (0..n)
        .map(|j| {
            let jf = j * refine;
            let mut sum = Complex64::new(0.0, 0.0);
            for m in (1..m_total).step_by(2) {
                let half = (z[jf] - z[m]) * 0.5;
                sum += gamma.values()[m] * half.cos() / half.sin();
            }
            weight * sum
        })
        .collect();
    ComplexPeriodicField::new(coarse, out).unwrap()
}

/// State displaced by `h` along the given direction.
pub fn displaced(state: &InterfaceState, dtheta: &PeriodicField, dgamma: &PeriodicField, dl: f64, h: f64) -> InterfaceState {
    InterfaceState {
        theta: &state.theta + &(dtheta * h),
        gamma: &state.gamma + &(dgamma * h),
        length: state.length + h * dl,
        time: state.time + h,
    }
}

/// `(W_t, W_αt)` in conjugated complex form, by Richardson-extrapolated central
/// differences of the Birkhoff–Rott velocity along `(θ_t, γ_t, L_t)`.
pub fn fd_w_time_derivatives(
    state: &InterfaceState,
    theta_t: &PeriodicField,
    gamma_t: &PeriodicField,
    length_t: f64,
    h: f64,
) -> (ComplexPeriodicField, ComplexPeriodicField) {
    let w_at = |step: f64| {
        let s = displaced(state, theta_t, gamma_t, length_t, step);
        CurveOps::with_closure_tolerance(&s, 1e-6).unwrap().birkhoff_rott_conj(&s.gamma)
    };
    let central = |step: f64| (&w_at(step) - &w_at(-step)) * (1.0 / (2.0 * step));
    let d = central(h);
    let d_half = central(h / 2.0);
    let w_t = (&d_half * 4.0 - &d) * (1.0 / 3.0);
    let w_at_t = w_t.derivative(1);
    (w_t, w_at_t)
}

pub fn real_part(c: &ComplexPeriodicField) -> PeriodicField {
    c.re()
}

/// Second transcription of the `s_α W_t·t` and `W_αt·n` remainders and of the
/// first γ_t balance, written directly from the unsimplified definitions.
pub struct DirectForm<'a> {
    pub state: &'a InterfaceState,
    pub params: &'a PhysParams,
    pub ops: &'a CurveOps,
    pub kin: &'a Kinematics,
}

impl<'a> DirectForm<'a> {
    fn h_over_2i(v: &ComplexPeriodicField) -> ComplexPeriodicField {
        v * Complex64::new(0.0, -0.5)
    }

    fn comm(phi: &ComplexPeriodicField, f: &ComplexPeriodicField) -> ComplexPeriodicField {
        &(phi * f).hilbert() - &(phi * &f.hilbert())
    }

    pub fn r1(&self) -> PeriodicField {
        let za = self.ops.z_alpha();
        let zt = &self.kin.z_t;
        let inner = (&self.state.gamma / za).derivative(1);
        let mut total = (za * zt * &self.ops.k(&inner)).re();
        total = total - (za * &self.ops.k(&(zt * &inner))).re();
        total - Self::h_over_2i(&(za * &Self::comm(zt, &(&inner / za)))).re()
    }

    pub fn r2(&self) -> PeriodicField {
        let za = self.ops.z_alpha();
        let f = &self.state.gamma * &self.kin.z_t_alpha / za;
        let first = (za * &self.ops.k(&f)).re();
        let second = Self::h_over_2i(&(za * &Self::comm(&za.recip(), &f))).re();
        -first - second - (&self.state.gamma * &self.kin.theta_t).hilbert() * 0.5
    }

    pub fn r3(&self) -> PeriodicField {
        let za = self.ops.z_alpha();
        let sa = self.ops.s_alpha();
        let zt = &self.kin.z_t;
        let zat = &self.kin.z_t_alpha;
        let za2 = za * za;
        let inv2 = za2.recip();
        let ik = |v: &ComplexPeriodicField| (&(&za2 * &self.ops.k(v)) * Complex64::new(0.0, 1.0 / sa)).re();
        let hc = |phi: &ComplexPeriodicField, v: &ComplexPeriodicField| (&(&za2 * &Self::comm(phi, v)) * (0.5 / sa)).re();
        let gz = (&self.state.gamma / za).derivative(1);
        let w = (-(&self.state.gamma * zat) / &za2).derivative(1);
        let p = (&gz / za).derivative(1);
        let ikz = (&(&(&za2 * zt) * &self.ops.k(&p)) * Complex64::new(0.0, 1.0 / sa)).re();
        ik(&w) + hc(&inv2, &(za * &w)) - hc(&inv2, &(&gz * zat)) - ik(&(&(&gz * zat) / za)) + ikz
            - ik(&(zt * &p))
            - hc(zt, &(&p / za))
    }

    pub fn r4(&self) -> PeriodicField {
        let l = self.state.length;
        let k = self.kin;
        let ta = self.state.theta.derivative(1);
        let g = &self.state.gamma;
        (&k.theta_t * &(g * &ta).hilbert()) * (PI / l) - g.derivative(1).hilbert() * (PI * k.length_t / (l * l))
            - (&(g * &ta) * &k.theta_t).hilbert() * (2.0 * PI / l)
            + &k.m_n * (k.length_t / l)
            - &k.theta_t * &k.m_t
    }

    /// Right side of the first γ_t balance given `s_αW_t·t`, `W_αt·n` and `W_α·t`.
    pub fn gamma_balance(&self, sa_wt_t: &PeriodicField, wat_n: &PeriodicField, wa_t: &PeriodicField) -> PeriodicField {
        let st = self.state;
        let p = self.params;
        let l = st.length;
        let sa = l / (2.0 * PI);
        let th = &st.theta;
        let g = &st.gamma;
        let ta = th.derivative(1);
        let taa = th.derivative(2);
        let vw = &self.kin.v_w;
        let rho = p.rho0 / sa;
        let sin = th.map(f64::sin);
        let y_a = &sin * sa;
        let x_aa = -(&sin * &ta) * sa;
        let bending = (th.derivative(4) + &ta * &ta * &taa * 1.5) * (-p.sigma * p.a_bar(l));
        let tension = &taa * p.lambda(l);
        let transport = (vw * g).derivative(1) * (2.0 * PI / l);
        let atwood = (sa_wt_t + &(g * &g.derivative(1)) * (PI * PI / (l * l)) - vw * wa_t + &y_a * p.g) * (-2.0 * p.atwood());
        let mass = (wat_n - &(sa_wt_t * &ta) * (1.0 / sa)
            + &vw.derivative(1) * &self.kin.theta_t
            + vw * &self.kin.theta_t.derivative(1)
            + &x_aa * (2.0 * PI * p.g / l))
            * (-2.0 * p.a_tilde() * rho);
        bending + tension + transport + atwood + mass
    }
}
