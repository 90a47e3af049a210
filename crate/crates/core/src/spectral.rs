//! Fourier-side primitives on the uniform 2π-periodic grid.
//!
//! Coefficients follow `f̂_k = (1/N) Σ_j f(α_j) e^{-ikα_j}` with `α_j = 2πj/N`.
//! The Nyquist mode `k = N/2` is kept by projections, norms and the filter,
//! and zeroed by every differential or Hilbert-type multiplier so that real
//! inputs stay real.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative tolerance on the mean accepted by [`PeriodicField::antiderivative`].
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// Uniform collocation grid on `[0, 2π)` with shared FFT plans.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Signed wavenumber of FFT slot `j`; the Nyquist slot reports `+N/2`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// FFT slot holding wavenumber `k`, if it is resolved on this grid.
    pub fn slot(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k.abs() > half {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((self.n as i64 + k) as usize)
        }
    }

    pub(crate) fn check(&self, other: &Grid) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::GridMismatch(self.n, other.n))
        }
    }

    /// Normalized forward transform.
    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf
    }

    fn apply_multiplier<M>(&self, values: &[Complex64], keep_nyquist: bool, mult: M) -> Vec<Complex64>
    where
        M: Fn(i64) -> Complex64,
    {
        let mut coeffs = self.forward(values);
        for (j, c) in coeffs.iter_mut().enumerate() {
            if self.is_nyquist(j) && !keep_nyquist {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= mult(self.wavenumber(j));
            }
        }
        self.inverse(&coeffs)
    }
}

fn ik_pow(k: i64, order: u32) -> Complex64 {
    Complex64::new(0.0, k as f64).powu(order)
}

fn hilbert_symbol(k: i64) -> Complex64 {
    Complex64::new(0.0, -(k.signum() as f64))
}

fn sobolev_sum(grid: &Grid, coeffs: &[Complex64], s: f64) -> f64 {
    let sum: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let k = grid.wavenumber(j) as f64;
            (1.0 + k * k).powf(s) * c.norm_sqr()
        })
        .sum();
    (2.0 * PI * sum).sqrt()
}

/// N real samples on a [`Grid`].
#[derive(Clone, Debug)]
pub struct PeriodicField {
    grid: Grid,
    values: Vec<f64>,
}

/// N complex samples on a [`Grid`].
#[derive(Clone, Debug)]
pub struct ComplexPeriodicField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl PeriodicField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(grid.len(), values.len()));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(grid.clone(), grid.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_raw(grid.clone(), vec![c; grid.len()])
    }

    /// Real field from Fourier coefficients indexed by FFT slot.
    pub fn from_spectrum(grid: &Grid, coeffs: &[Complex64]) -> Self {
        Self::from_raw(grid.clone(), grid.inverse(coeffs).into_iter().map(|c| c.re).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_same_grid(&self.grid, &other.grid);
        Self::from_raw(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn to_complex(&self) -> ComplexPeriodicField {
        ComplexPeriodicField::from_raw(
            self.grid.clone(),
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Trapezoid rule over one period.
    pub fn integral(&self) -> f64 {
        2.0 * PI * self.mean()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        self.grid.forward(&self.to_complex().values)
    }

    /// Coefficient of wavenumber `k`, or zero when unresolved.
    pub fn mode(&self, k: i64) -> Complex64 {
        match self.grid.slot(k) {
            Some(j) => self.spectrum()[j],
            None => Complex64::new(0.0, 0.0),
        }
    }

    fn real_multiplier(&self, keep_nyquist: bool, mult: impl Fn(i64) -> Complex64) -> Self {
        let out = self.grid.apply_multiplier(&self.to_complex().values, keep_nyquist, mult);
        Self::from_raw(self.grid.clone(), out.into_iter().map(|c| c.re).collect())
    }

    /// Spectral `∂_α^order`.
    pub fn derivative(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        self.real_multiplier(false, |k| ik_pow(k, order))
    }

    /// Periodic Hilbert transform, symbol `-i sgn(k)`.
    pub fn hilbert(&self) -> Self {
        self.real_multiplier(false, hilbert_symbol)
    }

    pub fn project_zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Mean-zero antiderivative of a mean-zero field.
    pub fn antiderivative(&self) -> Result<Self> {
        let mean = self.mean();
        if mean.abs() > MEAN_TOLERANCE * (1.0 + self.max_abs()) {
            return Err(Error::NonZeroMean { mean });
        }
        Ok(self.real_multiplier(false, |k| {
            if k == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / k as f64)
            }
        }))
    }

    /// `Λ^s`, multiplier `|k|^s`.
    pub fn fractional_lambda(&self, s: f64) -> Self {
        self.real_multiplier(false, |k| {
            if k == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new((k.abs() as f64).powf(s), 0.0)
            }
        })
    }

    /// Real even multiplier `m(|k|)`; the Nyquist mode is scaled by `m(N/2)`.
    pub fn radial_multiplier(&self, m: impl Fn(u64) -> f64) -> Self {
        self.real_multiplier(true, |k| Complex64::new(m(k.unsigned_abs()), 0.0))
    }

    /// `(2π Σ_k (1+k²)^s |f̂_k|²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        sobolev_sum(&self.grid, &self.spectrum(), s)
    }

    /// Zero every Fourier coefficient whose modulus is below `floor`.
    pub fn krasny_filter(&self, floor: f64) -> Self {
        if floor <= 0.0 {
            return self.clone();
        }
        let mut coeffs = self.spectrum();
        let mut touched = false;
        for c in coeffs.iter_mut() {
            if c.norm() < floor && *c != Complex64::new(0.0, 0.0) {
                *c = Complex64::new(0.0, 0.0);
                touched = true;
            }
        }
        if !touched {
            return self.clone();
        }
        Self::from_spectrum(&self.grid, &coeffs)
    }

    /// Spectral interpolation (or truncation) onto another grid.
    pub fn resample(&self, target: &Grid) -> Self {
        let out = resample_coeffs(&self.grid, &self.spectrum(), target);
        Self::from_raw(target.clone(), out.into_iter().map(|c| c.re).collect())
    }
}

impl ComplexPeriodicField {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(grid.len(), values.len()));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Self::from_raw(grid.clone(), grid.nodes().into_iter().map(f).collect())
    }

    pub fn from_parts(re: &PeriodicField, im: &PeriodicField) -> Self {
        assert_same_grid(&re.grid, &im.grid);
        Self::from_raw(
            re.grid.clone(),
            re.values.iter().zip(&im.values).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        )
    }

    pub fn constant(grid: &Grid, c: Complex64) -> Self {
        Self::from_raw(grid.clone(), vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn re(&self) -> PeriodicField {
        PeriodicField::from_raw(self.grid.clone(), self.values.iter().map(|c| c.re).collect())
    }

    pub fn im(&self) -> PeriodicField {
        PeriodicField::from_raw(self.grid.clone(), self.values.iter().map(|c| c.im).collect())
    }

    pub fn conj(&self) -> Self {
        self.map(|c| c.conj())
    }

    pub fn recip(&self) -> Self {
        self.map(|c| c.inv())
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        self.grid.forward(&self.values)
    }

    fn multiplier(&self, keep_nyquist: bool, mult: impl Fn(i64) -> Complex64) -> Self {
        Self::from_raw(self.grid.clone(), self.grid.apply_multiplier(&self.values, keep_nyquist, mult))
    }

    pub fn derivative(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        self.multiplier(false, |k| ik_pow(k, order))
    }

    pub fn hilbert(&self) -> Self {
        self.multiplier(false, hilbert_symbol)
    }

    pub fn project_zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn antiderivative(&self) -> Result<Self> {
        let mean = self.mean();
        if mean.norm() > MEAN_TOLERANCE * (1.0 + self.max_abs()) {
            return Err(Error::NonZeroMean { mean: mean.norm() });
        }
        Ok(self.multiplier(false, |k| {
            if k == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / k as f64)
            }
        }))
    }

    pub fn resample(&self, target: &Grid) -> Self {
        Self::from_raw(target.clone(), resample_coeffs(&self.grid, &self.spectrum(), target))
    }
}

fn resample_coeffs(source: &Grid, coeffs: &[Complex64], target: &Grid) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
    let shared = source.len().min(target.len()) / 2;
    for (j, c) in coeffs.iter().enumerate() {
        let k = source.wavenumber(j);
        if (k.unsigned_abs() as usize) < shared {
            out[target.slot(k).expect("resolved")] = *c;
        } else if k.unsigned_abs() as usize == shared {
            // Split the boundary mode symmetrically so real data stays real.
            let half = *c * if source.is_nyquist(j) { 0.5 } else { 1.0 };
            if target.len() > source.len() && source.is_nyquist(j) {
                out[target.slot(k).expect("resolved")] += half;
                out[target.slot(-k).expect("resolved")] += half;
            } else {
                out[target.slot(shared as i64).expect("resolved")] += *c;
            }
        }
    }
    target.inverse(&out)
}

/// `[H, φ] f = H(φ f) − φ H f` for real fields.
pub fn hilbert_commutator(phi: &PeriodicField, f: &PeriodicField) -> PeriodicField {
    (phi * f).hilbert() - phi * &f.hilbert()
}

/// Complex-valued Hilbert commutator.
pub fn hilbert_commutator_c(phi: &ComplexPeriodicField, f: &ComplexPeriodicField) -> ComplexPeriodicField {
    (phi * f).hilbert() - phi * &f.hilbert()
}

#[track_caller]
fn assert_same_grid(a: &Grid, b: &Grid) {
    assert!(a == b, "grid mismatch: {} vs {} points", a.len(), b.len());
}

/// Element access shared by both field kinds for the operator impls.
trait Samples {
    type Elem: Copy;
    fn grid(&self) -> &Grid;
    fn at(&self, j: usize) -> Self::Elem;
}

impl Samples for PeriodicField {
    type Elem = f64;
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn at(&self, j: usize) -> f64 {
        self.values[j]
    }
}

impl Samples for ComplexPeriodicField {
    type Elem = Complex64;
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn at(&self, j: usize) -> Complex64 {
        self.values[j]
    }
}

trait FromSamples<T> {
    fn build(grid: Grid, values: Vec<T>) -> Self;
}

impl FromSamples<f64> for PeriodicField {
    fn build(grid: Grid, values: Vec<f64>) -> Self {
        Self::from_raw(grid, values)
    }
}

impl FromSamples<Complex64> for ComplexPeriodicField {
    fn build(grid: Grid, values: Vec<Complex64>) -> Self {
        Self::from_raw(grid, values)
    }
}

#[track_caller]
fn binary<A, B, T, O>(a: &A, b: &B, f: impl Fn(A::Elem, B::Elem) -> T) -> O
where
    A: Samples,
    B: Samples,
    O: FromSamples<T>,
{
    assert_same_grid(a.grid(), b.grid());
    let n = a.grid().len();
    O::build(a.grid().clone(), (0..n).map(|j| f(a.at(j), b.at(j))).collect())
}

macro_rules! field_field_op {
    ($Lhs:ty, $Rhs:ty, $Out:ty, $Trait:ident, $method:ident, $op:tt) => {
        impl $Trait<&$Rhs> for &$Lhs {
            type Output = $Out;
            #[track_caller]
            fn $method(self, rhs: &$Rhs) -> $Out {
                binary(self, rhs, |a, b| a $op b)
            }
        }
        impl $Trait<$Rhs> for $Lhs {
            type Output = $Out;
            #[track_caller]
            fn $method(self, rhs: $Rhs) -> $Out {
                binary(&self, &rhs, |a, b| a $op b)
            }
        }
        impl $Trait<&$Rhs> for $Lhs {
            type Output = $Out;
            #[track_caller]
            fn $method(self, rhs: &$Rhs) -> $Out {
                binary(&self, rhs, |a, b| a $op b)
            }
        }
        impl $Trait<$Rhs> for &$Lhs {
            type Output = $Out;
            #[track_caller]
            fn $method(self, rhs: $Rhs) -> $Out {
                binary(self, &rhs, |a, b| a $op b)
            }
        }
    };
}

macro_rules! field_scalar_op {
    ($Field:ty, $Scalar:ty, $Out:ident, $Trait:ident, $method:ident, $op:tt) => {
        impl $Trait<$Scalar> for &$Field {
            type Output = $Out;
            fn $method(self, rhs: $Scalar) -> $Out {
                let values = (0..self.len()).map(|j| self.at(j) $op rhs).collect();
                $Out::from_raw(self.grid.clone(), values)
            }
        }
        impl $Trait<$Scalar> for $Field {
            type Output = $Out;
            fn $method(self, rhs: $Scalar) -> $Out {
                (&self).$method(rhs)
            }
        }
        impl $Trait<&$Field> for $Scalar {
            type Output = $Out;
            fn $method(self, rhs: &$Field) -> $Out {
                let values = (0..rhs.len()).map(|j| self $op rhs.at(j)).collect();
                $Out::from_raw(rhs.grid.clone(), values)
            }
        }
        impl $Trait<$Field> for $Scalar {
            type Output = $Out;
            fn $method(self, rhs: $Field) -> $Out {
                self.$method(&rhs)
            }
        }
    };
}

macro_rules! all_ops {
    ($mac:ident, $($args:tt)*) => {
        $mac!($($args)*, Add, add, +);
        $mac!($($args)*, Sub, sub, -);
        $mac!($($args)*, Mul, mul, *);
        $mac!($($args)*, Div, div, /);
    };
}

all_ops!(field_field_op, PeriodicField, PeriodicField, PeriodicField);
all_ops!(field_field_op, ComplexPeriodicField, ComplexPeriodicField, ComplexPeriodicField);
all_ops!(field_field_op, ComplexPeriodicField, PeriodicField, ComplexPeriodicField);
all_ops!(field_field_op, PeriodicField, ComplexPeriodicField, ComplexPeriodicField);
all_ops!(field_scalar_op, PeriodicField, f64, PeriodicField);
all_ops!(field_scalar_op, ComplexPeriodicField, f64, ComplexPeriodicField);
all_ops!(field_scalar_op, ComplexPeriodicField, Complex64, ComplexPeriodicField);
all_ops!(field_scalar_op, PeriodicField, Complex64, ComplexPeriodicField);

impl Neg for &PeriodicField {
    type Output = PeriodicField;
    fn neg(self) -> PeriodicField {
        self.map(|v| -v)
    }
}

impl Neg for PeriodicField {
    type Output = PeriodicField;
    fn neg(self) -> PeriodicField {
        -&self
    }
}

impl Neg for &ComplexPeriodicField {
    type Output = ComplexPeriodicField;
    fn neg(self) -> ComplexPeriodicField {
        self.map(|v| -v)
    }
}

impl Neg for ComplexPeriodicField {
    type Output = ComplexPeriodicField;
    fn neg(self) -> ComplexPeriodicField {
        -&self
    }
}
