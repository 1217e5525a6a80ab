//! Average teleportation fidelity, its closed forms, and the sub-Planck scale measures.

use crate::error::{Error, Result};
use crate::fock::{quad_moments, PureState, QuantumState};
use crate::phasespace::{auto_grid, husimi_grid, wigner_grid, PhaseGrid, Repr};
use crate::fock::displacement_matrix_real;
use crate::quadrature::GaussRule;
use crate::scalar::Real;
use crate::special::{compensated_sum, legendre, ln_binomial, ln_factorial, Neumaier};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Squeezing of the shared resource, t = 2e^{−2r}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParam<T> {
    t: T,
    r: T,
}

impl<T: Real> SqueezeParam<T> {
    pub fn from_t(t: T) -> Result<Self> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(Error::invalid(format!("squeezing t = {} must be finite and ≥ 0", t.f64())));
        }
        let r = if t == T::zero() { T::infinity() } else { -(t / T::lit(2.0)).ln() / T::lit(2.0) };
        Ok(SqueezeParam { t, r })
    }

    pub fn from_r(r: T) -> Result<Self> {
        Self::from_t(T::lit(2.0) * (-T::lit(2.0) * r).exp())
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn r(&self) -> T {
        self.r
    }

    /// t ∈ [0, 2]: squeezing at least as good as the classical limit.
    pub fn in_relevant_range(&self) -> bool {
        self.t <= T::lit(2.0)
    }
}

/// Which of the four equivalent fidelity integrals to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FidelityForm {
    /// (2/t)∫(d²ν/π) e^{−2|ν|²/t}|Φ(ν)|²
    One,
    /// ∫d²βd²ν e^{−t|β−ν|²/2} W(β)W(ν) on a grid
    Two,
    /// (2/t)∫d²βd²ν e^{−2|β−ν|²/t} W(β)W(ν) on a grid
    Three,
    /// ∫(d²μ/π) e^{−t|μ|²/2}|Φ(μ)|²
    Four,
}

impl FidelityForm {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(FidelityForm::One),
            2 => Ok(FidelityForm::Two),
            3 => Ok(FidelityForm::Three),
            4 => Ok(FidelityForm::Four),
            _ => Err(Error::invalid(format!("fidelity form {i} not in 1..=4"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            FidelityForm::One => 1,
            FidelityForm::Two => 2,
            FidelityForm::Three => 3,
            FidelityForm::Four => 4,
        }
    }
}

/// Grid spacing used by the Wigner-grid forms when none is given.
pub const GRID_SPACING: f64 = 0.1;

/// Number of Fock levels up to the last coefficient above 1e−16.
pub fn support_len<T: Real>(state: &PureState<T>) -> usize {
    let cut = T::lit(1e-16);
    state.coeffs().iter().rposition(|c| c.norm() > cut).map_or(1, |k| k + 1)
}

fn trimmed<T: Real>(state: &PureState<T>) -> PureState<T> {
    let n = support_len(state);
    PureState::from_coeffs(state.coeffs()[..n].to_vec()).expect("non-empty support")
}

/// ∫₀^∞ dx e^{−c x} Σ_k |g_k(√x)|², where g_k are the angular modes of Φ.
///
/// With x = |μ|² the angular average of |Φ|² equals Σ_k|g_k|² (Parseval), and
/// Σ_k|g_k|² = e^{−x}·(polynomial of degree < N). Gauss–Laguerre in y = (1+c)x is
/// therefore exact once the node count reaches the support length; the estimate is
/// still confirmed against a rule twice as large.
pub(crate) fn radial_mode_integral<T: Real>(repr: &Repr<T>, c: T) -> Result<T> {
    let n = repr.dim();
    let mut k = 64usize.max(n + 8);
    let mut prev = radial_mode_integral_k(repr, c, k)?;
    let mut change = T::nan();
    for _ in 0..4 {
        let k2 = 2 * k;
        let cur = radial_mode_integral_k(repr, c, k2)?;
        change = (cur - prev).abs();
        if change <= T::lit(1e-8).max(T::epsilon() * T::lit(1e3)) {
            return Ok(cur);
        }
        prev = cur;
        k = k2;
    }
    Err(Error::Quadrature { what: "radial characteristic-function integral", change: change.f64() })
}

fn radial_mode_integral_k<T: Real>(repr: &Repr<T>, c: T, k: usize) -> Result<T> {
    let rule = GaussRule::<T>::laguerre(k)?;
    let beta = T::one() + c;
    let n = repr.dim();
    let terms: Vec<T> = rule
        .nodes
        .par_iter()
        .zip(rule.log_weights.par_iter())
        .map(|(&y, &lw)| {
            let x = y / beta;
            let lwx = lw + x;
            if lwx < T::lit(-700.0) {
                return T::zero();
            }
            let d = displacement_matrix_real(x.sqrt(), n, n);
            let s: T = repr.angular_modes(&d).iter().map(|g| g.norm_sqr()).sum();
            lwx.exp() * s
        })
        .collect();
    Ok(compensated_sum(terms) / beta)
}

/// Average teleportation fidelity of a pure state by one of the four integral forms.
pub fn fidelity_quadrature<T: Real>(state: &PureState<T>, t: SqueezeParam<T>, form: FidelityForm) -> Result<T> {
    let t = t.t();
    if t == T::zero() {
        return Ok(T::one());
    }
    let s = trimmed(state);
    match form {
        FidelityForm::Four => radial_mode_integral(&Repr::Pure(s.coeffs().to_vec()), t / T::lit(2.0)),
        FidelityForm::One => {
            let c = T::lit(2.0) / t;
            Ok(c * radial_mode_integral(&Repr::Pure(s.coeffs().to_vec()), c)?)
        }
        FidelityForm::Two | FidelityForm::Three => {
            let grid = auto_grid(&s, T::lit(GRID_SPACING))?;
            let w = wigner_grid(&s, &grid);
            Ok(grid_form(&w, t, form))
        }
    }
}

/// Forms 2 and 3 on a precomputed Wigner grid.
pub fn grid_form<T: Real>(w: &PhaseGrid<T>, t: T, form: FidelityForm) -> T {
    match form {
        FidelityForm::Two => gaussian_pair_integral(w, t / T::lit(4.0)) / T::lit(4.0),
        FidelityForm::Three => gaussian_pair_integral(w, T::one() / t) * T::lit(2.0) / t / T::lit(4.0),
        _ => panic!("grid_form handles forms 2 and 3 only"),
    }
}

fn trapezoid_weights<T: Real>(n: usize, h: T) -> Vec<T> {
    (0..n).map(|i| if i == 0 || i + 1 == n { h / T::lit(2.0) } else { h }).collect()
}

/// ∫dβ₁dβ₂dν₁dν₂ e^{−a|β−ν|²_q} W(β)W(ν) with |·|_q the Euclidean quadrature norm,
/// evaluated as Σ W ⊙ (K₁ W K₂ᵀ) with 1D Gaussian kernels.
fn gaussian_pair_integral<T: Real>(w: &PhaseGrid<T>, a: T) -> T {
    let (n1, n2) = w.resolution;
    let (h1, h2) = w.spacing();
    let w1 = trapezoid_weights(n1, h1);
    let w2 = trapezoid_weights(n2, h2);
    let k1: Vec<T> = (0..n1 * n1).map(|ij| (-a * (h1 * T::of(ij / n1) - h1 * T::of(ij % n1)).powi(2)).exp()).collect();
    let k2: Vec<T> = (0..n2 * n2).map(|ij| (-a * (h2 * T::of(ij / n2) - h2 * T::of(ij % n2)).powi(2)).exp()).collect();
    // weighted field u = w_i w_j W_ij
    let u: Vec<T> = (0..n1 * n2).map(|ij| w.values[ij] * w1[ij / n2] * w2[ij % n2]).collect();
    // v = u K₂ᵀ along the second axis
    let mut v = vec![T::zero(); n1 * n2];
    v.par_chunks_mut(n2).enumerate().for_each(|(i, row)| {
        let ui = &u[i * n2..(i + 1) * n2];
        for (j, out) in row.iter_mut().enumerate() {
            let kr = &k2[j * n2..(j + 1) * n2];
            *out = ui.iter().zip(kr).map(|(a, b)| *a * *b).sum();
        }
    });
    // total = Σ_{i,j} u_ij Σ_a K1[i,a] v_aj
    let rows: Vec<T> = (0..n1)
        .into_par_iter()
        .map(|i| {
            let kr = &k1[i * n1..(i + 1) * n1];
            let mut acc = vec![T::zero(); n2];
            for (a, &kv) in kr.iter().enumerate() {
                if kv < T::lit(1e-300).max(T::min_positive_value()) {
                    continue;
                }
                for (o, x) in acc.iter_mut().zip(&v[a * n2..(a + 1) * n2]) {
                    *o += kv * *x;
                }
            }
            acc.iter().zip(&u[i * n2..(i + 1) * n2]).map(|(a, b)| *a * *b).sum()
        })
        .collect();
    compensated_sum(rows)
}

/// 1/(1 + t/2): the coherent-state fidelity and the supremum over all states.
pub fn coherent_fidelity<T: Real>(t: T) -> T {
    T::one() / (T::one() + t / T::lit(2.0))
}

/// Largest average fidelity any pure input can reach at squeezing t; attained
/// by coherent states.
pub fn max_fidelity_bound<T: Real>(t: T) -> T {
    coherent_fidelity(t)
}

/// Squeezed vacuum: (1 + t cosh 2u + t²/4)^{−1/2}.
pub fn squeezed_fidelity<T: Real>(u: T, t: T) -> T {
    (T::one() + t * (T::lit(2.0) * u).cosh() + t * t / T::lit(4.0)).sqrt().recip()
}

/// Number state |n⟩: (1−t/2)ⁿ/(1+t/2)^{n+1} P_n((1+t²/4)/(1−t²/4)), switching to the
/// equivalent positive sum Σ_k C(n,k)²(t/2)^{2(n−k)}/(1+t/2)^{2n+1} near t = 2.
pub fn number_fidelity<T: Real>(n: usize, t: T) -> T {
    let u = t / T::lit(2.0);
    if (T::one() - u * u).abs() < T::lit(1e-2) {
        number_fidelity_expanded(n, t)
    } else {
        number_fidelity_legendre(n, t)
    }
}

/// Legendre form of the number-state fidelity (singular at t = 2).
pub fn number_fidelity_legendre<T: Real>(n: usize, t: T) -> T {
    let u = t / T::lit(2.0);
    let z = (T::one() + u * u) / (T::one() - u * u);
    (T::one() - u).powi(n as i32) / (T::one() + u).powi(n as i32 + 1) * legendre(n, z)
}

/// Positive-term polynomial form of the number-state fidelity.
pub fn number_fidelity_expanded<T: Real>(n: usize, t: T) -> T {
    let u = t / T::lit(2.0);
    if u == T::zero() {
        return T::one();
    }
    let lu = u.ln();
    let lb = (T::one() + u).ln() * T::of(2 * n + 1);
    compensated_sum((0..=n).map(|k| {
        (T::lit(2.0) * ln_binomial::<T>(n, k) + T::of(2 * (n - k)) * lu - lb).exp()
    }))
}

/// Compass state of amplitude a. All hyperbolic terms are carried with a factor
/// e^{−a²}, so the formula stays finite for any a and tends to 1/(4(1+t/2)).
pub fn compass_fidelity<T: Real>(a: T, t: T) -> T {
    let a2 = a * a;
    let k = (T::lit(2.0) - t) / (T::lit(2.0) + t);
    let ka2 = k * a2;
    let e = (-a2).exp();
    // cosh(y)e^{−a²} for |y| ≤ a²
    let ch = |y: T| T::lit(0.5) * ((y - a2).exp() + (-y - a2).exp());
    let a_ = ch(ka2) + ka2.cos() * e;
    let b_ = ch(a2) + ka2.cos() * e;
    let c_ = a2.cos() * e + ch(ka2);
    let d_ = ch(a2) + a2.cos() * e;
    coherent_fidelity(t) / T::lit(4.0) * (T::one() + (a_ * a_ + T::lit(2.0) * b_ * c_) / (d_ * d_))
}

/// Slope dF̄/dt at t = 0 of the compass state.
pub fn compass_slope<T: Real>(a: T) -> T {
    let a2 = a * a;
    let e = (-a2).exp();
    let sh = T::lit(0.5) * (T::one() - e * e);
    let ch = T::lit(0.5) * (T::one() + e * e);
    let ratio = (sh - a2.sin() * e) / (ch + a2.cos() * e);
    -(T::one() + T::lit(2.0) * a2 * ratio) / T::lit(2.0)
}

/// Ensemble-average fidelity of random pure states in an N-dimensional Fock subspace.
///
/// Each (m, n) pair contributes two terminating hypergeometric integrals. They
/// are evaluated in forms whose terms are all non-negative (a Pfaff transformation
/// for the one that alternates), term by term in the log domain, so N = 100 carries
/// no cancellation.
pub fn random_avg_fidelity<T: Real>(n_dim: usize, t: T) -> T {
    if t == T::zero() || n_dim == 0 {
        return T::one();
    }
    let u = t / T::lit(2.0);
    let lbeta = (T::one() + u).ln();
    let pairs: Vec<T> = (0..n_dim * n_dim)
        .into_par_iter()
        .map(|mn| {
            let (m, n) = (mn / n_dim, mn % n_dim);
            let (l1, l2) = pair_integrals_log(m, n, u);
            let shift = T::of(m + n + 1) * lbeta;
            (l1 - shift).exp() + (l2 - shift).exp()
        })
        .collect();
    compensated_sum(pairs) / T::of(n_dim * (n_dim + 1))
}

/// ln of the two positive hypergeometric blocks (m+n)!/(m!n!)·F(…; 1−u²) and
/// (m+n)!/(m!n!)·u^{m+n}F(…; 1−1/u²), u = t/2.
fn pair_integrals_log<T: Real>(m: usize, n: usize, u: T) -> (T, T) {
    let one = T::one();
    if u <= one {
        (pfaff_block_log(m, n, u), plain_block_log(m, n, u, one - u * u, u))
    } else {
        let inv = one / u;
        (plain_block_log(m, n, one, u * u - one, one), T::of(m + n) * u.ln() + pfaff_block_log(m, n, inv))
    }
}

/// ln Σ_k (m+n−k)!/(k!(m−k)!(n−k)!) z^k s^{m+n−2k}  (z, s ≥ 0).
fn plain_block_log<T: Real>(m: usize, n: usize, _u: T, z: T, s: T) -> T {
    let lz = z.ln();
    let ls = s.ln();
    let terms: Vec<T> = (0..=m.min(n))
        .map(|k| {
            let c = ln_factorial::<T>(m + n - k) - ln_factorial::<T>(k) - ln_factorial::<T>(m - k) - ln_factorial::<T>(n - k);
            c + pow_log(lz, k) + pow_log(ls, m + n - 2 * k)
        })
        .collect();
    log_sum_exp(&terms)
}

/// ln Σ_{k=0}^{m} (m+n−k)! m!/(n!(m−k)!² k!) (u²)^{m−k} (1−u²)^k, 0 ≤ u ≤ 1.
fn pfaff_block_log<T: Real>(m: usize, n: usize, u: T) -> T {
    let lu2 = (u * u).ln();
    let lz = (T::one() - u * u).ln();
    let terms: Vec<T> = (0..=m)
        .map(|k| {
            let c = ln_factorial::<T>(m + n - k) + ln_factorial::<T>(m)
                - ln_factorial::<T>(n)
                - T::lit(2.0) * ln_factorial::<T>(m - k)
                - ln_factorial::<T>(k);
            c + pow_log(lu2, m - k) + pow_log(lz, k)
        })
        .collect();
    log_sum_exp(&terms)
}

/// k·ln x with the convention 0·ln 0 = 0.
fn pow_log<T: Real>(lx: T, k: usize) -> T {
    if k == 0 {
        T::zero()
    } else {
        T::of(k) * lx
    }
}

fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let mx = xs.iter().cloned().fold(T::neg_infinity(), T::max);
    if mx == T::neg_infinity() {
        return mx;
    }
    mx + compensated_sum(xs.iter().map(|&x| (x - mx).exp())).ln()
}

/// The same ensemble average from the literal hypergeometric sums, with
/// alternating terms. Accurate only for small N; kept as a cross-check.
pub fn random_avg_fidelity_hypergeometric(n_dim: usize, t: f64) -> f64 {
    let u = t / 2.0;
    let hyp = |m: usize, n: usize, z: f64| -> f64 {
        // F(−m,−n;−m−n;z) = Σ_k (m+n−k)! m! n! / ((m+n)! k! (m−k)! (n−k)!) (−z)^k
        let mut acc = Neumaier::<f64>::default();
        for k in 0..=m.min(n) {
            let c = ln_factorial::<f64>(m + n - k) + ln_factorial::<f64>(m) + ln_factorial::<f64>(n)
                - ln_factorial::<f64>(m + n)
                - ln_factorial::<f64>(k)
                - ln_factorial::<f64>(m - k)
                - ln_factorial::<f64>(n - k);
            acc.add(c.exp() * (-z).powi(k as i32));
        }
        acc.sum()
    };
    let mut total = Neumaier::<f64>::default();
    for m in 0..n_dim {
        for n in 0..n_dim {
            let pre = (ln_factorial::<f64>(m + n) - ln_factorial::<f64>(m) - ln_factorial::<f64>(n)).exp()
                / (1.0 + u).powi((m + n + 1) as i32);
            let second = if u == 0.0 {
                if m + n == 0 { 1.0 } else { 0.0 }
            } else {
                u.powi((m + n) as i32) * hyp(m, n, 1.0 - 1.0 / (u * u))
            };
            total.add(pre * (hyp(m, n, 1.0 - u * u) + second));
        }
    }
    total.sum() / (n_dim * (n_dim + 1)) as f64
}

/// Ensemble average of dF̄/dt at t = 0 over random states in dimension N.
pub fn random_slope_avg<T: Real>(n_dim: usize) -> T {
    let n = T::of(n_dim);
    -(n * n + T::one()) / (T::lit(2.0) * (n + T::one()))
}

/// How to evaluate the fidelity slope at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlopeRoute {
    /// −((Δx)² + (Δp)²)/2 from the quadrature moments
    Variance,
    /// −(π/2)∫d²ν|∂W/∂ν|² from finite differences of a Wigner grid
    Gradient,
}

/// Default spacing for the gradient route.
pub const GRADIENT_SPACING: f64 = 0.05;

/// dF̄/dt at t = 0.
///
/// The gradient route is checked against the variance route; if they differ by
/// more than 1e−3 (relative) the grid is refined once before giving up.
pub fn slope_at_zero<T: Real>(state: &PureState<T>, route: SlopeRoute) -> Result<T> {
    let var = -quad_moments(state).var_sum() / T::lit(2.0);
    match route {
        SlopeRoute::Variance => Ok(var),
        SlopeRoute::Gradient => {
            let s = trimmed(state);
            let mut h = T::lit(GRADIENT_SPACING);
            let mut last = T::nan();
            for _ in 0..2 {
                let g = gradient_slope(&s, h)?;
                last = g;
                if ((g - var) / var).abs() <= T::lit(1e-3) {
                    return Ok(g);
                }
                h /= T::lit(2.0);
            }
            Err(Error::GridResolution { what: "Wigner-gradient slope", discrepancy: ((last - var) / var).abs().f64() })
        }
    }
}

/// −(π/8)∫dν₁dν₂|∇W|² with fourth-order central differences at spacing h.
pub fn gradient_slope<T: Real>(state: &PureState<T>, h: T) -> Result<T> {
    let base = auto_grid(state, h)?;
    // pad by two cells so the stencil fits at every retained node
    let (h1, _) = base.spacing();
    let pad = T::lit(2.0) * h1;
    let grid = PhaseGrid::<T>::new(
        base.center,
        (base.half_width.0 + pad, base.half_width.1 + pad),
        (base.resolution.0 + 4, base.resolution.1 + 4),
    )?;
    let w = wigner_grid(state, &grid);
    let (n1, n2) = grid.resolution;
    let (h1, h2) = grid.spacing();
    let at = |i: usize, j: usize| w.values[i * n2 + j];
    let c8 = T::lit(8.0);
    let c12 = T::lit(12.0);
    let rows: Vec<T> = (2..n1 - 2)
        .map(|i| {
            let mut acc = T::zero();
            for j in 2..n2 - 2 {
                let d1 = (-at(i + 2, j) + c8 * at(i + 1, j) - c8 * at(i - 1, j) + at(i - 2, j)) / (c12 * h1);
                let d2 = (-at(i, j + 2) + c8 * at(i, j + 1) - c8 * at(i, j - 1) + at(i, j - 2)) / (c12 * h2);
                let wj = if j == 2 || j == n2 - 3 { T::lit(0.5) } else { T::one() };
                acc += wj * (d1 * d1 + d2 * d2);
            }
            let wi = if i == 2 || i == n1 - 3 { T::lit(0.5) } else { T::one() };
            wi * acc
        })
        .collect();
    Ok(-T::PI() / T::lit(8.0) * compensated_sum(rows) * h1 * h2)
}

/// Slope, critical squeezing and the two phase-space lengths of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport<T> {
    pub slope0: T,
    pub t_c: T,
    pub ell_c: T,
    #[serde(rename = "L_c")]
    pub big_l_c: T,
}

impl<T: Real> ScaleReport<T> {
    /// Builds the report from a slope and the quadrature variance sum.
    pub fn from_slope_and_var(slope0: T, var_sum: T) -> Self {
        let t_c = T::one() / slope0.abs();
        ScaleReport {
            slope0,
            t_c,
            ell_c: (t_c / T::lit(2.0)).sqrt(),
            big_l_c: T::lit(2.0) * var_sum.sqrt(),
        }
    }

    /// ℓ_c · L_c (equal to 2 for every pure state).
    pub fn reciprocity(&self) -> T {
        self.ell_c * self.big_l_c
    }
}

/// Scale measures of a pure state from the variance route.
pub fn scale_report<T: Real>(state: &PureState<T>) -> Result<ScaleReport<T>> {
    let m = quad_moments(state);
    let slope = slope_at_zero(state, SlopeRoute::Variance)?;
    let r = ScaleReport::from_slope_and_var(slope, m.var_sum());
    if (r.reciprocity() - T::lit(2.0)).abs() > T::lit(1e-8).max(T::epsilon() * T::lit(100.0)) {
        return Err(Error::invalid(format!("ℓ_c·L_c = {} differs from 2", r.reciprocity().f64())));
    }
    Ok(r)
}

/// π∫d²ξ Q(ξ)² on a grid: the fidelity of measure-and-prepare teleportation (t = 2).
pub fn classical_fidelity<T: Real>(state: &PureState<T>) -> Result<T> {
    let s = trimmed(state);
    let grid = auto_grid(&s, T::lit(GRID_SPACING))?;
    classical_fidelity_on(&s, &grid)
}

pub fn classical_fidelity_on<T: Real, S: QuantumState<T> + ?Sized>(state: &S, grid: &PhaseGrid<T>) -> Result<T> {
    let mut q = husimi_grid(state, grid);
    for v in q.values.iter_mut() {
        *v = *v * *v;
    }
    Ok(T::PI() * q.integral())
}

/// How a fidelity curve was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveMethod {
    ClosedForm,
    Quadrature(FidelityForm),
}

/// Sampled F̄(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve<T> {
    pub points: Vec<(T, T)>,
    pub state: String,
    pub method: CurveMethod,
}

impl<T: Real> FidelityCurve<T> {
    /// Checks 0 < F ≤ 1, strict decrease and non-negative second differences
    /// (to −1e−8) on the sampled points; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-8);
        for &(t, f) in &self.points {
            if !(f > T::zero() && f <= T::one() + tol) {
                return Err(Error::invalid(format!("F({}) = {} outside (0, 1]", t.f64(), f.f64())));
            }
        }
        for w in self.points.windows(2) {
            if !(w[1].1 < w[0].1) && w[1].0 > w[0].0 {
                return Err(Error::invalid(format!("curve not decreasing at t = {}", w[1].0.f64())));
            }
        }
        for w in self.points.windows(3) {
            let (t0, f0) = w[0];
            let (t1, f1) = w[1];
            let (t2, f2) = w[2];
            // divided second difference, scaled to unit spacing
            let h = (t2 - t0) / T::lit(2.0);
            let dd = ((f2 - f1) / (t2 - t1) - (f1 - f0) / (t1 - t0)) * h;
            if dd < -tol {
                return Err(Error::invalid(format!("curve not convex near t = {}", t1.f64())));
            }
        }
        Ok(())
    }
}

/// F̄(t) at each t by quadrature, in parallel over t.
pub fn fidelity_curve<T: Real>(
    state: &PureState<T>,
    ts: &[T],
    form: FidelityForm,
    label: impl Into<String>,
) -> Result<FidelityCurve<T>> {
    let pts: Result<Vec<(T, T)>> = ts
        .par_iter()
        .map(|&t| Ok((t, fidelity_quadrature(state, SqueezeParam::from_t(t)?, form)?)))
        .collect();
    Ok(FidelityCurve { points: pts?, state: label.into(), method: CurveMethod::Quadrature(form) })
}


#[cfg(test)]
mod grid_form_tests {
    use super::*;
    use crate::fock::*;

    #[test]
    fn grid_forms_match_form_four() {
        let states = [make_number::<f64>(3, 64).unwrap(), make_compass(2.0f64, 64).unwrap()];
        for s in &states {
            for &t in &[0.3f64, 1.0, 2.0] {
                let p = SqueezeParam::from_t(t).unwrap();
                let f4 = fidelity_quadrature(s, p, FidelityForm::Four).unwrap();
                let f1 = fidelity_quadrature(s, p, FidelityForm::One).unwrap();
                assert!((f1 - f4).abs() < 1e-8);
                for form in [FidelityForm::Two, FidelityForm::Three] {
                    let f = fidelity_quadrature(s, p, form).unwrap();
                    assert!((f - f4).abs() < 1e-4, "{form:?} t={t}: {f} vs {f4}");
                }
            }
        }
    }
}
