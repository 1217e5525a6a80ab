//! Characteristic functions, Wigner, Husimi and s-ordered quasidistributions.

use crate::error::{Error, Result};
use crate::fock::{coherent_coeffs, displacement_matrix, displacement_matrix_real, quad_moments};
use crate::fock::{ComplexAmplitude, QuantumState, EDGE_WARN};
use crate::linalg::CMatrix;
use crate::quadrature::GaussRule;
use crate::scalar::{cis, cz, Real, C};
use crate::special::compensated_sum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Ordering parameter s ≤ 0 (0 Wigner, −1 Husimi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParam<T>(T);

impl<T: Real> OrderParam<T> {
    pub fn new(s: T) -> Result<Self> {
        if !(s <= T::zero()) {
            return Err(Error::invalid(format!("ordering parameter s = {} must be ≤ 0", s.f64())));
        }
        Ok(OrderParam(s))
    }

    pub fn wigner() -> Self {
        OrderParam(T::zero())
    }

    pub fn husimi() -> Self {
        OrderParam(-T::one())
    }

    pub fn s(self) -> T {
        self.0
    }
}

/// Density data in the cheapest form for contraction with displacement matrices.
pub(crate) enum Repr<T> {
    Pure(Vec<C<T>>),
    Mixed(CMatrix<T>),
}

impl<T: Real> Repr<T> {
    pub(crate) fn of<S: QuantumState<T> + ?Sized>(state: &S) -> Self {
        if state.edge_mass().f64() > EDGE_WARN {
            log::debug!("edge Fock population {:e}: truncation may distort phase-space values", state.edge_mass().f64());
        }
        match state.as_pure() {
            Some(p) => Repr::Pure(p.coeffs().to_vec()),
            None => Repr::Mixed(state.matrix().into_owned()),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        match self {
            Repr::Pure(c) => c.len(),
            Repr::Mixed(m) => m.rows(),
        }
    }

    /// Σ_{m,n} ρ_{nm} e^{i(m−n)θ} (±1)^n D_{mn}(r) with `d` the real N×N matrix D(r).
    /// This is tr[ρ D(re^{iθ})], or tr[ρ D(re^{iθ}) Π] when `parity` is set.
    pub(crate) fn contract(&self, d: &[T], theta: T, parity: bool) -> C<T> {
        let n = self.dim();
        let ph: Vec<C<T>> = (0..n).map(|k| cis(theta * T::of(k))).collect();
        let sgn = |k: usize| if parity && k % 2 == 1 { -T::one() } else { T::one() };
        match self {
            Repr::Pure(c) => {
                // Σ_m (c_m e^{-imθ})* Σ_n D_mn (±1)^n c_n e^{-inθ}
                let b: Vec<C<T>> = (0..n).map(|k| c[k] * ph[k].conj() * sgn(k)).collect();
                let mut acc = cz();
                for m in 0..n {
                    let row = &d[m * n..(m + 1) * n];
                    let mut s = cz();
                    for (dv, bv) in row.iter().zip(&b) {
                        s += bv * *dv;
                    }
                    acc += (c[m] * ph[m].conj()).conj() * s;
                }
                acc
            }
            Repr::Mixed(rho) => {
                let mut acc = cz();
                for m in 0..n {
                    let row = &d[m * n..(m + 1) * n];
                    let mut s = cz();
                    for k in 0..n {
                        s += rho[(k, m)] * ph[k].conj() * (row[k] * sgn(k));
                    }
                    acc += ph[m] * s;
                }
                acc
            }
        }
    }

    /// Angular Fourier modes g_k(r) of tr[ρD(re^{iθ})] = Σ_k e^{ikθ} g_k(r), k = m − n,
    /// returned with index k + (N − 1).
    pub(crate) fn angular_modes(&self, d: &[T]) -> Vec<C<T>> {
        let n = self.dim();
        let mut g = vec![cz(); 2 * n - 1];
        match self {
            Repr::Pure(c) => {
                for m in 0..n {
                    let cm = c[m].conj();
                    for k in 0..n {
                        g[m + n - 1 - k] += cm * c[k] * d[m * n + k];
                    }
                }
            }
            Repr::Mixed(rho) => {
                for m in 0..n {
                    for k in 0..n {
                        g[m + n - 1 - k] += rho[(k, m)] * d[m * n + k];
                    }
                }
            }
        }
        g
    }
}

fn polar<T: Real>(mu: ComplexAmplitude<T>) -> (T, T) {
    let z = mu.to_complex();
    (z.norm(), z.arg())
}

/// Symmetric characteristic function Φ(μ) = tr[ρD(μ)].
pub fn char_fn<T: Real, S: QuantumState<T> + ?Sized>(state: &S, mu: ComplexAmplitude<T>) -> C<T> {
    let repr = Repr::of(state);
    char_fn_repr(&repr, mu)
}

pub(crate) fn char_fn_repr<T: Real>(repr: &Repr<T>, mu: ComplexAmplitude<T>) -> C<T> {
    let n = repr.dim();
    let (r, th) = polar(mu);
    repr.contract(&displacement_matrix_real(r, n, n), th, false)
}

/// s-ordered characteristic function Φ^{(s)}(μ) = e^{s|μ|²/2}Φ(μ).
pub fn s_ordered_char<T: Real, S: QuantumState<T> + ?Sized>(
    state: &S,
    order: OrderParam<T>,
    mu: ComplexAmplitude<T>,
) -> C<T> {
    char_fn(state, mu) * (order.s() * mu.norm_sqr() / T::lit(2.0)).exp()
}

/// Wigner function W(α) = (2/π) tr[ρ D(2α) Π], Π the parity operator.
pub fn wigner<T: Real, S: QuantumState<T> + ?Sized>(state: &S, alpha: ComplexAmplitude<T>) -> T {
    wigner_repr(&Repr::of(state), alpha)
}

pub(crate) fn wigner_repr<T: Real>(repr: &Repr<T>, alpha: ComplexAmplitude<T>) -> T {
    let n = repr.dim();
    let (r, th) = polar(alpha.scale(T::lit(2.0)));
    repr.contract(&displacement_matrix_real(r, n, n), th, true).re * T::FRAC_2_PI()
}

/// Wigner function from the displaced parity sum (2/π)Σ_n (−1)ⁿ⟨n|D†(α)ρD(α)|n⟩,
/// with the displaced state represented on `ext_dim` levels.
pub fn wigner_parity_sum<T: Real, S: QuantumState<T> + ?Sized>(
    state: &S,
    alpha: ComplexAmplitude<T>,
    ext_dim: usize,
) -> T {
    let rho = state.matrix();
    let d = displacement_matrix(-alpha, ext_dim, state.dim());
    let shifted = &(&d * &rho) * &d.adjoint();
    let s = compensated_sum((0..ext_dim).map(|k| if k % 2 == 0 { shifted[(k, k)].re } else { -shifted[(k, k)].re }));
    s * T::FRAC_2_PI()
}

/// Husimi function Q(α) = ⟨α|ρ|α⟩/π.
pub fn husimi<T: Real, S: QuantumState<T> + ?Sized>(state: &S, alpha: ComplexAmplitude<T>) -> T {
    husimi_repr(&Repr::of(state), alpha)
}

pub(crate) fn husimi_repr<T: Real>(repr: &Repr<T>, alpha: ComplexAmplitude<T>) -> T {
    let v = coherent_coeffs(alpha, repr.dim());
    let q = match repr {
        Repr::Pure(c) => v.iter().zip(c).fold(cz::<T>(), |acc, (a, b)| acc + a.conj() * *b).norm_sqr(),
        Repr::Mixed(rho) => {
            let mut acc = cz::<T>();
            for (m, vm) in v.iter().enumerate() {
                for (n, vn) in v.iter().enumerate() {
                    acc += vm.conj() * rho[(m, n)] * vn;
                }
            }
            acc.re
        }
    };
    q * T::FRAC_1_PI()
}

/// s-ordered quasidistribution W^{(s)}(β) = (2/t)∫(d²ν/π)e^{−2|β−ν|²/t}W(ν), t = −s.
///
/// The Wigner function of a truncated state is a Gaussian e^{−(ν₁²+ν₂²)} times a
/// polynomial, so the smoothing integral is a Gaussian times a polynomial and a
/// Gauss–Hermite product rule centred on the combined Gaussian is exact once it has
/// more nodes than the state dimension. The rule is checked against a larger one
/// and grown until two estimates agree.
pub fn s_quasidist<T: Real, S: QuantumState<T> + ?Sized>(
    state: &S,
    order: OrderParam<T>,
    alpha: ComplexAmplitude<T>,
) -> Result<T> {
    let repr = Repr::of(state);
    let t = -order.s();
    if t == T::zero() {
        return Ok(wigner_repr(&repr, alpha));
    }
    let n = repr.dim();
    let mut k = n + 2;
    let mut prev = smoothing_gh(&repr, t, alpha, k)?;
    for _ in 0..4 {
        let k2 = k + 8.max(k / 2);
        let cur = smoothing_gh(&repr, t, alpha, k2)?;
        let change = (cur - prev).abs();
        if change <= T::lit(1e-10).max(T::epsilon() * T::lit(100.0)) * (T::one() + cur.abs()) {
            return Ok(cur);
        }
        prev = cur;
        k = k2;
    }
    Err(Error::Quadrature { what: "s-ordered smoothing integral", change: f64::NAN })
}

fn smoothing_gh<T: Real>(repr: &Repr<T>, t: T, beta: ComplexAmplitude<T>, k: usize) -> Result<T> {
    let rule = GaussRule::<T>::hermite(k)?;
    let w: Vec<T> = rule.weights().collect();
    let st = t.sqrt();
    let op = T::one() + t;
    let sc = T::one() / op.sqrt();
    let y0 = (-st * beta.q1 / op, -st * beta.q2 / op);
    let terms: Vec<T> = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| {
            let y1 = y0.0 + rule.nodes[i] * sc;
            let y2 = y0.1 + rule.nodes[j] * sc;
            let nu = ComplexAmplitude::new(beta.q1 + st * y1, beta.q2 + st * y2);
            let gauss = -(y1 * y1 + y2 * y2) + op * ((y1 - y0.0).powi(2) + (y2 - y0.1).powi(2));
            w[i] * w[j] * wigner_repr(repr, nu) * gauss.exp()
        })
        .collect();
    Ok(compensated_sum(terms) * T::FRAC_1_PI() / op)
}

/// s-ordered quasidistribution from the displaced geometric series
/// W^{(s)}(α) = 2/(π(1−s)) Σ_n qⁿ⟨n|D†(α)ρD(α)|n⟩, q = (s+1)/(s−1),
/// summed until qⁿ < `eps`. Exact term by term, no quadrature.
pub fn s_quasidist_series<T: Real, S: QuantumState<T> + ?Sized>(
    state: &S,
    order: OrderParam<T>,
    alpha: ComplexAmplitude<T>,
    eps: T,
) -> T {
    SeriesEvaluator::new(state, order, eps).eval(alpha)
}

/// Reusable evaluator for the geometric-series form of W^{(s)}.
pub struct SeriesEvaluator<T> {
    repr: Repr<T>,
    q: T,
    pref: T,
    ext: usize,
}

impl<T: Real> SeriesEvaluator<T> {
    pub fn new<S: QuantumState<T> + ?Sized>(state: &S, order: OrderParam<T>, eps: T) -> Self {
        let s = order.s();
        let q = (s + T::one()) / (s - T::one());
        let ext = if q.abs() < T::min_positive_value() {
            1
        } else {
            let n = (eps.ln() / q.abs().ln()).ceil().to_usize().unwrap_or(1);
            n.max(1)
        };
        let ext = if s == T::zero() { ext.max(state.dim() * 2 + 64) } else { ext };
        SeriesEvaluator { repr: Repr::of(state), q, pref: T::lit(2.0) / (T::PI() * (T::one() - s)), ext }
    }

    /// Number of displaced Fock levels summed.
    pub fn ext_dim(&self) -> usize {
        self.ext
    }

    pub fn eval(&self, alpha: ComplexAmplitude<T>) -> T {
        let n = self.repr.dim();
        let ext = self.ext;
        let (r, th) = polar(-alpha);
        // ⟨k|D(−α)|m⟩ = e^{i(k−m)θ} D_km(r)
        let d = displacement_matrix_real(r, ext, n);
        let ph: Vec<C<T>> = (0..ext.max(n)).map(|k| cis(th * T::of(k))).collect();
        let mut acc = Vec::with_capacity(ext);
        match &self.repr {
            Repr::Pure(c) => {
                let b: Vec<C<T>> = (0..n).map(|m| c[m] * ph[m].conj()).collect();
                let mut qk = T::one();
                for k in 0..ext {
                    let row = &d[k * n..(k + 1) * n];
                    let amp = row.iter().zip(&b).fold(cz(), |a, (dv, bv)| a + bv * *dv);
                    acc.push(qk * amp.norm_sqr());
                    qk *= self.q;
                }
            }
            Repr::Mixed(rho) => {
                let mut qk = T::one();
                for k in 0..ext {
                    let row = &d[k * n..(k + 1) * n];
                    let v: Vec<C<T>> = (0..n).map(|m| ph[m].conj() * row[m]).collect();
                    let mut s = cz();
                    for i in 0..n {
                        let mut inner = cz();
                        for j in 0..n {
                            inner += rho[(i, j)] * v[j].conj();
                        }
                        s += v[i] * inner;
                    }
                    acc.push(qk * s.re);
                    qk *= self.q;
                }
            }
        }
        compensated_sum(acc) * self.pref
    }
}

/// Uniform rectangular grid over (ν₁, ν₂) with values stored row-major, ν₁ outer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid<T, V = T> {
    pub center: ComplexAmplitude<T>,
    pub half_width: (T, T),
    pub resolution: (usize, usize),
    pub values: Vec<V>,
}

impl<T: Real, V: Clone + Default> PhaseGrid<T, V> {
    pub fn new(center: ComplexAmplitude<T>, half_width: (T, T), resolution: (usize, usize)) -> Result<Self> {
        if resolution.0 < 2 || resolution.1 < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        if !(half_width.0 > T::zero() && half_width.1 > T::zero()) {
            return Err(Error::invalid("grid half-widths must be positive"));
        }
        Ok(PhaseGrid { center, half_width, resolution, values: vec![V::default(); resolution.0 * resolution.1] })
    }

    /// Square grid whose spacing is at most `spacing`.
    pub fn with_spacing(center: ComplexAmplitude<T>, half_width: T, spacing: T) -> Result<Self> {
        let n = ((T::lit(2.0) * half_width / spacing).ceil().to_usize().unwrap_or(2) + 1).max(2);
        Self::new(center, (half_width, half_width), (n, n))
    }

    pub fn spacing(&self) -> (T, T) {
        (
            T::lit(2.0) * self.half_width.0 / T::of(self.resolution.0 - 1),
            T::lit(2.0) * self.half_width.1 / T::of(self.resolution.1 - 1),
        )
    }

    pub fn axis1(&self) -> Vec<T> {
        let h = self.spacing().0;
        (0..self.resolution.0).map(|i| self.center.q1 - self.half_width.0 + h * T::of(i)).collect()
    }

    pub fn axis2(&self) -> Vec<T> {
        let h = self.spacing().1;
        (0..self.resolution.1).map(|j| self.center.q2 - self.half_width.1 + h * T::of(j)).collect()
    }

    pub fn point(&self, i: usize, j: usize) -> ComplexAmplitude<T> {
        let (h1, h2) = self.spacing();
        ComplexAmplitude::new(
            self.center.q1 - self.half_width.0 + h1 * T::of(i),
            self.center.q2 - self.half_width.1 + h2 * T::of(j),
        )
    }

    pub fn get(&self, i: usize, j: usize) -> &V {
        &self.values[i * self.resolution.1 + j]
    }

    /// Area element d²ν = dν₁dν₂/2 of one cell.
    pub fn cell_measure(&self) -> T {
        let (h1, h2) = self.spacing();
        h1 * h2 / T::lit(2.0)
    }

    /// Same geometry, fresh values.
    pub fn like<U: Clone + Default>(&self) -> PhaseGrid<T, U> {
        PhaseGrid {
            center: self.center,
            half_width: self.half_width,
            resolution: self.resolution,
            values: vec![U::default(); self.values.len()],
        }
    }
}

impl<T: Real> PhaseGrid<T, T> {
    /// Trapezoid-rule ∫d²ν of the stored values.
    pub fn integral(&self) -> T {
        let (n1, n2) = self.resolution;
        let w = |i: usize, n: usize| if i == 0 || i + 1 == n { T::lit(0.5) } else { T::one() };
        let terms = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).map(|(i, j)| w(i, n1) * w(j, n2) * *self.get(i, j));
        compensated_sum(terms) * self.cell_measure()
    }

    pub fn max_value(&self) -> T {
        self.values.iter().cloned().fold(T::neg_infinity(), T::max)
    }

    pub fn min_value(&self) -> T {
        self.values.iter().cloned().fold(T::infinity(), T::min)
    }
}

/// Fills a grid by evaluating `f` at every node; rows are processed in parallel
/// but each value depends only on its node, so the result is bit-identical
/// regardless of scheduling.
pub fn grid_eval<T, V, F>(f: F, grid: &PhaseGrid<T, V>) -> PhaseGrid<T, V>
where
    T: Real,
    V: Clone + Default + Send + Sync,
    F: Fn(ComplexAmplitude<T>) -> V + Sync,
{
    let mut out = grid.clone();
    let n2 = grid.resolution.1;
    out.values.par_chunks_mut(n2).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = f(grid.point(i, j));
        }
    });
    out
}

/// Wigner function sampled on `grid`.
pub fn wigner_grid<T: Real, S: QuantumState<T> + ?Sized>(state: &S, grid: &PhaseGrid<T>) -> PhaseGrid<T> {
    let repr = Repr::of(state);
    grid_eval(|a| wigner_repr(&repr, a), grid)
}

/// Husimi function sampled on `grid`.
pub fn husimi_grid<T: Real, S: QuantumState<T> + ?Sized>(state: &S, grid: &PhaseGrid<T>) -> PhaseGrid<T> {
    let repr = Repr::of(state);
    grid_eval(|a| husimi_repr(&repr, a), grid)
}

/// Characteristic function sampled on `grid`.
pub fn char_grid<T: Real, S: QuantumState<T> + ?Sized>(state: &S, grid: &PhaseGrid<T>) -> PhaseGrid<T, C<T>> {
    let repr = Repr::of(state);
    grid_eval(|m| char_fn_repr(&repr, m), &grid.like::<C<T>>())
}

/// Square grid centred on the state's mean covering 1.2 L_c plus three vacuum widths.
pub fn auto_grid<T: Real, S: QuantumState<T> + ?Sized>(state: &S, spacing: T) -> Result<PhaseGrid<T>> {
    let m = quad_moments(state);
    let lc = T::lit(2.0) * m.var_sum().max(T::zero()).sqrt();
    let half = T::lit(1.2) * lc + T::lit(3.0) * T::FRAC_1_SQRT_2();
    PhaseGrid::with_spacing(m.mean(), half, spacing)
}

/// Default resolution for figure-style grids.
pub const DEFAULT_GRID_RES: usize = 256;

/// tr(ρ₁ρ₂) by matrices and by π∫d²α W₁W₂ on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport<T> {
    pub matrix: T,
    pub grid: T,
}

/// Overlap tr(ρ₁ρ₂); the grid route on `grid` is reported alongside and a
/// disagreement above 1e−3 is an error.
pub fn overlap<T: Real, A, B>(rho1: &A, rho2: &B, grid: &PhaseGrid<T>) -> Result<OverlapReport<T>>
where
    A: QuantumState<T> + ?Sized,
    B: QuantumState<T> + ?Sized,
{
    if rho1.dim() != rho2.dim() {
        return Err(Error::invalid("overlap needs equal dimensions"));
    }
    let m = rho1.matrix().trace_product(&rho2.matrix()).re;
    let w1 = wigner_grid(rho1, grid);
    let w2 = wigner_grid(rho2, grid);
    let mut prod = w1.clone();
    for (p, b) in prod.values.iter_mut().zip(&w2.values) {
        *p *= *b;
    }
    let g = prod.integral() * T::PI();
    let diff = (m - g).abs();
    if diff > T::lit(1e-3) {
        return Err(Error::GridResolution { what: "Wigner-overlap grid quadrature", discrepancy: diff.f64() });
    }
    Ok(OverlapReport { matrix: m, grid: g })
}
