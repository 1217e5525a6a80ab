//! Truncated Fock-basis states, displacement-operator matrix elements and quadrature moments.
//!
//! Conventions: a phase-space point is ν = (ν₁ + iν₂)/√2, the measure is
//! d²ν = dν₁dν₂/2 and D(μ) = exp(μa† − μ*a).

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cis, cr, cz, Real, C};
use crate::special::{laguerre_scaled, ln_factorial};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;

/// Default tail-mass budget for truncated constructors.
pub const TAIL_LIMIT: f64 = 1e-10;
/// Default truncation for catalog states.
pub const DEFAULT_DIM: usize = 64;
/// Edge population above which moments are flagged as unreliable.
pub const EDGE_WARN: f64 = 1e-8;

/// Phase-space point stored by its quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexAmplitude<T> {
    pub q1: T,
    pub q2: T,
}

impl<T: Real> ComplexAmplitude<T> {
    pub fn new(q1: T, q2: T) -> Self {
        ComplexAmplitude { q1, q2 }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn from_complex(z: C<T>) -> Self {
        let s = T::SQRT_2();
        Self::new(z.re * s, z.im * s)
    }

    pub fn from_polar(r: T, theta: T) -> Self {
        Self::from_complex(C::from_polar(r, theta))
    }

    /// ν = (ν₁ + iν₂)/√2
    pub fn to_complex(self) -> C<T> {
        C::new(self.q1, self.q2) * T::FRAC_1_SQRT_2()
    }

    /// |ν|² = (ν₁² + ν₂²)/2
    pub fn norm_sqr(self) -> T {
        (self.q1 * self.q1 + self.q2 * self.q2) / T::lit(2.0)
    }

    pub fn abs(self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn conj(self) -> Self {
        Self::new(self.q1, -self.q2)
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.q1 * s, self.q2 * s)
    }
}

impl<T: Real> std::ops::Add for ComplexAmplitude<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.q1 + o.q1, self.q2 + o.q2)
    }
}

impl<T: Real> std::ops::Sub for ComplexAmplitude<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.q1 - o.q1, self.q2 - o.q2)
    }
}

impl<T: Real> std::ops::Neg for ComplexAmplitude<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.q1, -self.q2)
    }
}

fn norm_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(1e3))
}

/// Pure state as a truncated vector of Fock coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T> {
    coeffs: Vec<C<T>>,
}

impl<T: Real> PureState<T> {
    /// Wraps coefficients, renormalising them. Fails on an empty or zero vector.
    pub fn from_coeffs(coeffs: Vec<C<T>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("state needs at least one coefficient"));
        }
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::invalid("state vector has zero or non-finite norm"));
        }
        Ok(PureState { coeffs: coeffs.into_iter().map(|c| c / norm).collect() })
    }

    pub fn basis(n: usize, dim: usize) -> Result<Self> {
        make_number(n, dim)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[C<T>] {
        &self.coeffs
    }

    pub fn norm_sqr(&self) -> T {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// ⟨self|other⟩ over the common support.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.coeffs.iter().zip(&other.coeffs).fold(cz(), |acc, (a, b)| acc + a.conj() * b)
    }

    /// |⟨self|other⟩|²
    pub fn overlap(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// Pads with zeros (or truncates and renormalises) to `dim`.
    pub fn resized(&self, dim: usize) -> Result<Self> {
        let mut c = self.coeffs.clone();
        c.resize(dim, cz());
        Self::from_coeffs(c)
    }

    /// Multiplies by the phase that makes the largest coefficient real and positive.
    pub fn with_canonical_phase(mut self) -> Self {
        let k = self
            .coeffs
            .iter()
            .enumerate()
            .fold((0usize, T::zero()), |best, (i, c)| if c.norm() > best.1 { (i, c.norm()) } else { best })
            .0;
        let c = self.coeffs[k];
        if c.norm() > T::zero() {
            let ph = c.conj() / c.norm();
            for z in self.coeffs.iter_mut() {
                *z *= ph;
            }
            self.coeffs[k] = C::new(c.norm(), T::zero());
        }
        self
    }

    /// Phase-space rotation c_n → e^{inθ}c_n, taking |ν⟩ to |e^{iθ}ν⟩.
    pub fn rotated(&self, theta: T) -> Self {
        PureState { coeffs: self.coeffs.iter().enumerate().map(|(n, c)| c * cis(theta * T::of(n))).collect() }
    }

    pub fn density(&self) -> DensityOp<T> {
        let n = self.dim();
        DensityOp { matrix: CMatrix::from_fn(n, n, |i, j| self.coeffs[i] * self.coeffs[j].conj()) }
    }

    /// D(μ)|ψ⟩ in a space of dimension `rows`.
    pub fn displaced(&self, mu: ComplexAmplitude<T>, rows: usize) -> Vec<C<T>> {
        displacement_matrix(mu, rows, self.dim()).mul_vec(&self.coeffs)
    }
}

/// Density operator on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp<T> {
    matrix: CMatrix<T>,
}

impl<T: Real> DensityOp<T> {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.rows() != matrix.cols() || matrix.rows() == 0 {
            return Err(Error::invalid("density matrix must be square and non-empty"));
        }
        let tol = norm_tol::<T>();
        let herm = matrix.hermiticity_defect();
        if herm > tol {
            return Err(Error::invalid(format!("matrix is not Hermitian (defect {:e})", herm.f64())));
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) {
            return Err(Error::invalid(format!("trace {} differs from 1", tr.re.f64())));
        }
        let (vals, _) = matrix.hermitian_eigen()?;
        let min = vals.iter().cloned().fold(T::infinity(), T::min);
        if min < -T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) {
            return Err(Error::invalid(format!("matrix has negative eigenvalue {:e}", min.f64())));
        }
        Ok(DensityOp { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn purity(&self) -> T {
        self.matrix.trace_product(&self.matrix).re
    }

    /// ⟨ψ|ρ|ψ⟩ over the common support.
    pub fn expectation_in(&self, psi: &PureState<T>) -> T {
        let n = self.dim().min(psi.dim());
        let c = psi.coeffs();
        let mut acc = cz();
        for i in 0..n {
            for j in 0..n {
                acc += c[i].conj() * self.matrix[(i, j)] * c[j];
            }
        }
        acc.re
    }

    /// Largest |m − n| with a non-negligible entry.
    pub fn bandwidth(&self) -> usize {
        let n = self.dim();
        let scale = T::lit(1e-15);
        let mut w = 0;
        for i in 0..n {
            for j in 0..n {
                if self.matrix[(i, j)].norm() > scale {
                    w = w.max(i.abs_diff(j));
                }
            }
        }
        w
    }

    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        Ok(self.matrix.hermitian_eigen()?.0)
    }
}

/// Inverse temperature and mean occupation of a thermal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams<T> {
    nbar: T,
    lambda: T,
}

impl<T: Real> ThermalParams<T> {
    pub fn from_nbar(nbar: T) -> Result<Self> {
        if !(nbar >= T::zero()) || !nbar.is_finite() {
            return Err(Error::invalid("thermal n̄ must be finite and non-negative"));
        }
        let lambda = if nbar == T::zero() { T::infinity() } else { (T::one() / nbar).ln_1p() };
        Ok(ThermalParams { nbar, lambda })
    }

    pub fn from_lambda(lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::invalid("thermal λ must be positive"));
        }
        let nbar = if lambda.is_infinite() { T::zero() } else { T::one() / lambda.exp_m1() };
        Ok(ThermalParams { nbar, lambda })
    }

    pub fn nbar(&self) -> T {
        self.nbar
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }
}

/// Anything that can hand out its density matrix.
pub trait QuantumState<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn matrix(&self) -> Cow<'_, CMatrix<T>>;

    /// Population of the last retained Fock level.
    fn edge_mass(&self) -> T;

    fn as_pure(&self) -> Option<&PureState<T>> {
        None
    }
}

impl<T: Real> QuantumState<T> for PureState<T> {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn matrix(&self) -> Cow<'_, CMatrix<T>> {
        Cow::Owned(self.density().matrix)
    }

    fn edge_mass(&self) -> T {
        self.coeffs.last().map(|c| c.norm_sqr()).unwrap_or_else(T::zero)
    }

    fn as_pure(&self) -> Option<&PureState<T>> {
        Some(self)
    }
}

impl<T: Real> QuantumState<T> for DensityOp<T> {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn matrix(&self) -> Cow<'_, CMatrix<T>> {
        Cow::Borrowed(&self.matrix)
    }

    fn edge_mass(&self) -> T {
        let n = self.dim();
        self.matrix[(n - 1, n - 1)].re.abs()
    }
}

/// ⟨m|D(μ)|n⟩ from the associated-Laguerre closed form, evaluated with a
/// rescaled recurrence and log-factorials so large indices stay finite.
pub fn displacement_element<T: Real>(m: usize, n: usize, mu: ComplexAmplitude<T>) -> C<T> {
    let x = mu.norm_sqr();
    let z = mu.to_complex();
    // For m < n use ⟨m|D(μ)|n⟩ = ⟨n|D(−μ)|m⟩*.
    let (hi, lo, w) = if m >= n { (m, n, z) } else { (n, m, -z.conj()) };
    let k = hi - lo;
    let lag = laguerre_scaled(lo, T::of(k), x);
    if lag.mantissa == T::zero() {
        return cz();
    }
    if k > 0 && x == T::zero() {
        return cz();
    }
    let log_mag = T::lit(0.5) * (ln_factorial::<T>(lo) - ln_factorial::<T>(hi)) - x / T::lit(2.0)
        + if k > 0 { T::of(k) * w.norm().ln() } else { T::zero() }
        + lag.log_scale
        + lag.mantissa.abs().ln();
    let sign = lag.mantissa.signum();
    let phase = if k > 0 { cis(w.arg() * T::of(k)) } else { cr(T::one()) };
    phase * (sign * log_mag.exp())
}

/// Real matrix ⟨m|D(r)|n⟩ for real r ≥ 0, row-major `rows × cols`.
///
/// Each diagonal m − n = k is generated by the normalised Laguerre recurrence
/// f_{n+1} = [(2n+1+k−x) f_n − √(n(n+k)) f_{n−1}] / √((n+1)(n+k+1)), x = r²,
/// started from the coherent amplitude f_0 = e^{−x/2}r^k/√k! and carried with a
/// separate log-scale so that neither overflow nor early underflow occurs. The
/// upper triangle follows from ⟨m|D(r)|n⟩ = (−1)^{n−m}⟨n|D(r)|m⟩.
pub fn displacement_matrix_real<T: Real>(r: T, rows: usize, cols: usize) -> Vec<T> {
    let mut d = vec![T::zero(); rows * cols];
    if rows == 0 || cols == 0 {
        return d;
    }
    if r == T::zero() {
        for i in 0..rows.min(cols) {
            d[i * cols + i] = T::one();
        }
        return d;
    }
    let x = r * r;
    let lr = r.ln();
    let half = T::lit(0.5);
    let big = T::lit(1e100);
    let lbig = big.ln();
    let kmax = rows.max(cols);
    for k in 0..kmax {
        // lower diagonal (m = n + k, needs m < rows, n < cols); upper mirror (n = m + k).
        let len_lo = if k < rows { (rows - k).min(cols) } else { 0 };
        let len_up = if k > 0 && k < cols { (cols - k).min(rows) } else { 0 };
        let len = len_lo.max(len_up);
        if len == 0 {
            continue;
        }
        let kf = T::of(k);
        let mut log_scale = -x * half + kf * lr - half * ln_factorial::<T>(k);
        let mut scale = log_scale.exp();
        let mut f_prev = T::zero();
        let mut f = T::one();
        let sign = if k % 2 == 1 { -T::one() } else { T::one() };
        for n in 0..len {
            let v = if scale >= T::min_positive_value() {
                f * scale
            } else if f == T::zero() {
                T::zero()
            } else {
                f.signum() * (f.abs().ln() + log_scale).exp()
            };
            if n < len_lo {
                d[(n + k) * cols + n] = v;
            }
            if n < len_up {
                d[n * cols + n + k] = sign * v;
            }
            let nf = T::of(n);
            let next = ((T::lit(2.0) * nf + T::one() + kf - x) * f - (nf * (nf + kf)).sqrt() * f_prev)
                / ((nf + T::one()) * (nf + kf + T::one())).sqrt();
            f_prev = f;
            f = next;
            if f.abs() > big {
                f /= big;
                f_prev /= big;
                log_scale += lbig;
                scale = log_scale.exp();
            }
        }
    }
    d
}

/// Complex matrix ⟨m|D(μ)|n⟩ (`rows × cols`) using the rotation identity
/// ⟨m|D(re^{iθ})|n⟩ = e^{i(m−n)θ}⟨m|D(r)|n⟩.
pub fn displacement_matrix<T: Real>(mu: ComplexAmplitude<T>, rows: usize, cols: usize) -> CMatrix<T> {
    let z = mu.to_complex();
    let (r, theta) = (z.norm(), z.arg());
    let dr = displacement_matrix_real(r, rows, cols);
    let ph_row: Vec<C<T>> = (0..rows).map(|m| cis(theta * T::of(m))).collect();
    let ph_col: Vec<C<T>> = (0..cols).map(|n| cis(-theta * T::of(n))).collect();
    CMatrix::from_fn(rows, cols, |m, n| ph_row[m] * ph_col[n] * dr[m * cols + n])
}

/// Unnormalised coherent amplitudes e^{−|ν|²/2}νⁿ/√n! for n < len.
pub fn coherent_coeffs<T: Real>(nu: ComplexAmplitude<T>, len: usize) -> Vec<C<T>> {
    let z = nu.to_complex();
    let x = z.norm_sqr();
    if x == T::zero() {
        let mut v = vec![cz(); len];
        if len > 0 {
            v[0] = cr(T::one());
        }
        return v;
    }
    let (lr, th) = (z.norm().ln(), z.arg());
    let half = T::lit(0.5);
    (0..len)
        .map(|n| {
            let mag = (-x * half + T::of(n) * lr - half * ln_factorial::<T>(n)).exp();
            cis(th * T::of(n)) * mag
        })
        .collect()
}

/// Sums a positive series term(n) for n ≥ start until the terms stop mattering.
fn positive_tail<T: Real>(start: usize, step: usize, term: impl Fn(usize) -> T) -> T {
    let mut acc = T::zero();
    let mut n = start;
    let mut peak = T::zero();
    for _ in 0..1_000_000 {
        let t = term(n);
        acc += t;
        peak = peak.max(t);
        if t <= acc * T::lit(1e-18) && t < peak || t == T::zero() && n > start + 64 {
            break;
        }
        n += step;
    }
    acc
}

fn check_tail<T: Real>(tail: T, limit: f64, dim: usize) -> Result<()> {
    if tail.f64() > limit {
        Err(Error::Truncation { tail_mass: tail.f64(), limit, dim })
    } else {
        Ok(())
    }
}

/// Coherent state |ν⟩ truncated at `dim`, failing if the discarded tail exceeds 1e−10.
pub fn make_coherent<T: Real>(nu: ComplexAmplitude<T>, dim: usize) -> Result<PureState<T>> {
    make_coherent_tol(nu, dim, TAIL_LIMIT)
}

/// As [`make_coherent`] with a caller-chosen tail budget.
pub fn make_coherent_tol<T: Real>(nu: ComplexAmplitude<T>, dim: usize, tail_limit: f64) -> Result<PureState<T>> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let x = nu.norm_sqr();
    let lx = x.ln();
    let tail = if x == T::zero() {
        T::zero()
    } else {
        positive_tail(dim, 1, |n| (-x + T::of(n) * lx - ln_factorial::<T>(n)).exp())
    };
    check_tail(tail, tail_limit, dim)?;
    Ok(PureState::from_coeffs(coherent_coeffs(nu, dim))?.with_canonical_phase())
}

/// Number state |n⟩ in a space of dimension `dim`.
pub fn make_number<T: Real>(n: usize, dim: usize) -> Result<PureState<T>> {
    if n >= dim {
        return Err(Error::Index { index: n, dim });
    }
    let mut c = vec![cz(); dim];
    c[n] = cr(T::one());
    Ok(PureState { coeffs: c })
}

/// ln |c_{2m}| of the squeezed vacuum.
fn ln_squeezed_coeff<T: Real>(m: usize, u: T) -> T {
    let th = u.tanh().abs();
    let lt = if th == T::zero() { T::neg_infinity() } else { th.ln() };
    let mm = if m == 0 { T::zero() } else { T::of(m) * lt };
    mm + T::lit(0.5) * ln_factorial::<T>(2 * m) - T::of(m) * T::LN_2() - ln_factorial::<T>(m) - T::lit(0.5) * u.cosh().ln()
}

/// Squeezed vacuum with Var x = e^{−2u}/2 and Var p = e^{2u}/2.
pub fn make_squeezed<T: Real>(u: T, dim: usize) -> Result<PureState<T>> {
    make_squeezed_tol(u, dim, TAIL_LIMIT)
}

pub fn make_squeezed_tol<T: Real>(u: T, dim: usize, tail_limit: f64) -> Result<PureState<T>> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let first_missing = dim.div_ceil(2);
    let tail = if u == T::zero() {
        T::zero()
    } else {
        positive_tail(first_missing, 1, |m| (T::lit(2.0) * ln_squeezed_coeff(m, u)).exp())
    };
    check_tail(tail, tail_limit, dim)?;
    let sign = if u > T::zero() { -T::one() } else { T::one() };
    let c = (0..dim)
        .map(|n| {
            if n % 2 == 1 {
                return cz();
            }
            let m = n / 2;
            let s = if m % 2 == 1 { sign } else { T::one() };
            cr(s * ln_squeezed_coeff(m, u).exp())
        })
        .collect();
    Ok(PureState::from_coeffs(c)?.with_canonical_phase())
}

/// ln(cosh y + cos y) − y, stable for large y.
pub(crate) fn ln_cosh_plus_cos_scaled<T: Real>(y: T) -> T {
    // (cosh y + cos y) e^{-y} = (1 + e^{-2y})/2 + cos y · e^{-y}
    let e = (-y).exp();
    (T::lit(0.5) * (T::one() + e * e) + y.cos() * e).ln()
}

/// Compass state: equal superposition of |a⟩, |−a⟩, |ia⟩, |−ia⟩ for real a ≥ 0.
pub fn make_compass<T: Real>(a: T, dim: usize) -> Result<PureState<T>> {
    make_compass_tol(a, dim, TAIL_LIMIT)
}

pub fn make_compass_tol<T: Real>(a: T, dim: usize, tail_limit: f64) -> Result<PureState<T>> {
    if !(a >= T::zero()) {
        return Err(Error::invalid("compass amplitude must be non-negative"));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if a == T::zero() {
        return make_number(0, dim);
    }
    let a2 = a * a;
    let la = a.ln();
    let half = T::lit(0.5);
    // c_n = 2aⁿ/(√n! √(2(cosh a² + cos a²))) for n ≡ 0 mod 4
    let ln_norm = half * (T::LN_2() + a2 + ln_cosh_plus_cos_scaled(a2));
    let ln_c = |n: usize| T::LN_2() + T::of(n) * la - half * ln_factorial::<T>(n) - ln_norm;
    let first = dim.div_ceil(4) * 4;
    let tail = positive_tail(first, 4, |n| (T::lit(2.0) * ln_c(n)).exp());
    check_tail(tail, tail_limit, dim)?;
    let c = (0..dim).map(|n| if n % 4 == 0 { cr(ln_c(n).exp()) } else { cz() }).collect();
    Ok(PureState::from_coeffs(c)?.with_canonical_phase())
}

/// Random pure state drawn uniformly from the unit sphere of C^dim.
pub fn random_state<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<PureState<T>> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let c = (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C::new(T::lit(re), T::lit(im))
        })
        .collect();
    Ok(PureState::from_coeffs(c)?.with_canonical_phase())
}

/// Seeded random pure state; the same seed always yields the same coefficients.
pub fn make_random<T: Real>(dim: usize, seed: u64) -> Result<PureState<T>> {
    random_state(dim, &mut crate::rng::seeded(seed))
}

/// Thermal state (1 − e^{−λ})e^{−λn} on `dim` levels.
pub fn make_thermal<T: Real>(params: ThermalParams<T>, dim: usize) -> Result<DensityOp<T>> {
    make_thermal_tol(params, dim, TAIL_LIMIT)
}

pub fn make_thermal_tol<T: Real>(params: ThermalParams<T>, dim: usize, tail_limit: f64) -> Result<DensityOp<T>> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let lam = params.lambda();
    let tail = if lam.is_infinite() { T::zero() } else { (-lam * T::of(dim)).exp() };
    check_tail(tail, tail_limit, dim)?;
    let mut p: Vec<T> = (0..dim)
        .map(|n| if lam.is_infinite() { if n == 0 { T::one() } else { T::zero() } } else { (-lam * T::of(n)).exp() })
        .collect();
    let s: T = crate::special::compensated_sum(p.iter().cloned());
    for v in p.iter_mut() {
        *v /= s;
    }
    Ok(DensityOp { matrix: CMatrix::from_fn(dim, dim, |i, j| if i == j { cr(p[i]) } else { cz() }) })
}

/// First and second quadrature moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadMoments<T> {
    pub mean_x: T,
    pub mean_p: T,
    pub var_x: T,
    pub var_p: T,
}

impl<T: Real> QuadMoments<T> {
    /// (Δx)² + (Δp)²
    pub fn var_sum(&self) -> T {
        self.var_x + self.var_p
    }

    pub fn mean(&self) -> ComplexAmplitude<T> {
        ComplexAmplitude::new(self.mean_x, self.mean_p)
    }
}

/// ⟨a⟩, ⟨a²⟩ and ⟨a†a⟩ of a density matrix.
pub(crate) fn ladder_moments<T: Real>(rho: &CMatrix<T>) -> (C<T>, C<T>, T) {
    let n = rho.rows();
    let mut a = cz();
    let mut a2 = cz();
    let mut num = T::zero();
    for m in 0..n {
        num += T::of(m) * rho[(m, m)].re;
        if m + 1 < n {
            a += rho[(m + 1, m)] * T::of(m + 1).sqrt();
        }
        if m + 2 < n {
            a2 += rho[(m + 2, m)] * (T::of(m + 1) * T::of(m + 2)).sqrt();
        }
    }
    (a, a2, num)
}

/// Quadrature means and variances with x = (a + a†)/√2, p = (a − a†)/(i√2).
///
/// Uses the ladder-operator moments of the retained coefficients, so the
/// result is exact for the truncated state itself. Logs (debug) when the
/// last Fock level is populated above 1e−8.
pub fn quad_moments<T: Real, S: QuantumState<T> + ?Sized>(state: &S) -> QuadMoments<T> {
    let edge = state.edge_mass();
    if edge.f64() > EDGE_WARN {
        log::debug!("edge Fock population {:e} exceeds {:e}; moments may be unreliable", edge.f64(), EDGE_WARN);
    }
    let rho = state.matrix();
    let (a, a2, num) = ladder_moments(&rho);
    let half = T::lit(0.5);
    let mean_x = T::SQRT_2() * a.re;
    let mean_p = T::SQRT_2() * a.im;
    let x2 = a2.re + num + half;
    let p2 = -a2.re + num + half;
    QuadMoments { mean_x, mean_p, var_x: x2 - mean_x * mean_x, var_p: p2 - mean_p * mean_p }
}
