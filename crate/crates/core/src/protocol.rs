//! The squeezed-state teleportation protocol in Wigner-function language: the
//! resource, Alice's outcome statistics, conditional and averaged outputs, and
//! Monte Carlo runs over outcomes.

use crate::error::{Error, Result};
use crate::fidelity::SqueezeParam;
use crate::fock::{displacement_matrix, displacement_matrix_real, quad_moments, ComplexAmplitude, DensityOp, QuantumState};
use crate::linalg::CMatrix;
use crate::phasespace::{auto_grid, s_quasidist_series, wigner_grid, OrderParam, PhaseGrid};
use crate::quadrature::GaussRule;
use crate::rng::substream;
use crate::scalar::{cz, Real, C};
use crate::special::{compensated_sum, Neumaier};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Two-mode squeezed vacuum shared by Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EPRResource<T> {
    t: SqueezeParam<T>,
}

impl<T: Real> EPRResource<T> {
    pub fn new(t: SqueezeParam<T>) -> Self {
        EPRResource { t }
    }

    pub fn t(&self) -> SqueezeParam<T> {
        self.t
    }

    /// Joint Wigner function of modes A and B.
    pub fn wigner(&self, alpha: ComplexAmplitude<T>, beta: ComplexAmplitude<T>) -> Result<T> {
        epr_wigner(self.t.t(), alpha, beta)
    }

    /// Width σ of Alice's marginal, whose Wigner function is (2/πσ)e^{−2|α|²/σ}.
    pub fn marginal_width(&self) -> T {
        marginal_width(self.t.t())
    }
}

fn require_positive<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("squeezing t = {} must be positive here", t.f64())))
    }
}

/// (4/π²)exp(−2|β+α*|²/t − t|β−α*|²/2).
pub fn epr_wigner<T: Real>(t: T, alpha: ComplexAmplitude<T>, beta: ComplexAmplitude<T>) -> Result<T> {
    require_positive(t)?;
    let plus = beta + alpha.conj();
    let minus = beta - alpha.conj();
    let e = -T::lit(2.0) * plus.norm_sqr() / t - t * minus.norm_sqr() / T::lit(2.0);
    Ok(T::lit(4.0) * T::FRAC_1_PI() * T::FRAC_1_PI() * e.exp())
}

/// Displacement noise P(ν) = (2/πt)e^{−2|ν|²/t}.
pub fn p_dist<T: Real>(t: T, nu: ComplexAmplitude<T>) -> Result<T> {
    require_positive(t)?;
    Ok(T::lit(2.0) / (T::PI() * t) * (-T::lit(2.0) * nu.norm_sqr() / t).exp())
}

/// Its Fourier partner P̃(μ) = (1/π)e^{−t|μ|²/2}; finite at t = 0.
pub fn p_tilde<T: Real>(t: T, mu: ComplexAmplitude<T>) -> T {
    T::FRAC_1_PI() * (-t * mu.norm_sqr() / T::lit(2.0)).exp()
}

/// σ = (1 + t²/4)/t.
pub fn marginal_width<T: Real>(t: T) -> T {
    (T::one() + t * t / T::lit(4.0)) / t
}

/// Exponent margin for the averaged output: levels beyond the input support
/// needed before the geometric tail (t/(2+t))ⁿ drops below 1e−13.
fn channel_margin<T: Real>(t: T) -> usize {
    let q = t / (T::lit(2.0) + t);
    (T::lit(1e-13).ln() / q.ln()).ceil().to_usize().unwrap_or(0) + 10
}

/// Averaged output state ∫d²ν P(ν)D(ν)ρD†(ν).
///
/// With ν = √x e^{iθ} the angular integral selects n − m = k − j, leaving
/// ρ̄_{jk} = Σ_m ρ_{m,m+k−j}∫dx (2/t)e^{−2x/t}D_{jm}(√x)D_{k,m+k−j}(√x). The radial
/// integrand is e^{−(1+2/t)x} times a polynomial, so a Gauss–Laguerre rule with
/// enough nodes is exact. The output lives on a larger space than the input;
/// the trace deficit there is the leakage and must stay below 1e−10.
pub fn average_channel<T: Real, S: QuantumState<T> + ?Sized>(state: &S, t: T) -> Result<DensityOp<T>> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::invalid("squeezing t must be finite and ≥ 0"));
    }
    let rho = state.matrix().into_owned();
    if t == T::zero() {
        return DensityOp::from_matrix(rho);
    }
    let n = rho.rows();
    let m_out = n + channel_margin(t);
    let k = (m_out + n) / 2 + 16;
    let rule = GaussRule::<T>::laguerre(k)?;
    let beta = T::one() + T::lit(2.0) / t;
    let pre = T::lit(2.0) / t / beta;

    let partial: Vec<Vec<C<T>>> = rule
        .nodes
        .par_iter()
        .zip(rule.log_weights.par_iter())
        .filter_map(|(&y, &lw)| {
            let x = y / beta;
            if lw + x < T::lit(-700.0) {
                return None;
            }
            let w = pre * (lw + x).exp();
            let d = displacement_matrix_real(x.sqrt(), m_out, n);
            let mut out = vec![cz::<T>(); m_out * m_out];
            for j in 0..m_out {
                let dj = &d[j * n..(j + 1) * n];
                for kk in j..m_out {
                    let off = kk - j;
                    if off >= n {
                        break;
                    }
                    let dk = &d[kk * n..(kk + 1) * n];
                    let mut s = cz::<T>();
                    for m in 0..n - off {
                        s += rho[(m, m + off)] * (dj[m] * dk[m + off]);
                    }
                    out[j * m_out + kk] = s * w;
                }
            }
            Some(out)
        })
        .collect();
    let mut mat = CMatrix::zeros(m_out, m_out);
    for j in 0..m_out {
        for kk in j..m_out {
            let mut re = Neumaier::<T>::default();
            let mut im = Neumaier::<T>::default();
            for p in &partial {
                re.add(p[j * m_out + kk].re);
                im.add(p[j * m_out + kk].im);
            }
            let v = C::new(re.sum(), im.sum());
            mat[(j, kk)] = v;
            mat[(kk, j)] = v.conj();
        }
        let v = mat[(j, j)].re;
        mat[(j, j)] = C::new(v, T::zero());
    }
    let deficit = T::one() - mat.trace().re;
    if deficit.abs().f64() > 1e-10 {
        return Err(Error::Truncation { tail_mass: deficit.f64(), limit: 1e-10, dim: m_out });
    }
    DensityOp::from_matrix(mat)
}

/// The same channel by a product Gauss–Hermite rule over displacements, summing
/// P-weighted D(ν)ρD†(ν) on `out_dim` levels. Converges but is not exact; kept as
/// a cross-check.
pub fn average_channel_gh<T: Real, S: QuantumState<T> + ?Sized>(state: &S, t: T, nodes: usize, out_dim: usize) -> Result<CMatrix<T>> {
    require_positive(t)?;
    let rho = state.matrix().into_owned();
    let n = rho.rows();
    let rule = GaussRule::<T>::hermite(nodes)?;
    let w: Vec<T> = rule.weights().collect();
    let st = t.sqrt();
    let mut acc = CMatrix::zeros(out_dim, out_dim);
    for i in 0..nodes {
        for l in 0..nodes {
            let nu = ComplexAmplitude::new(st * rule.nodes[i], st * rule.nodes[l]);
            let d = displacement_matrix(nu, out_dim, n);
            let dr = &d * &rho;
            let full = &dr * &d.adjoint();
            let wt = w[i] * w[l] * T::FRAC_1_PI();
            for (a, b) in acc.as_mut_slice().iter_mut().zip(full.as_slice()) {
                *a += *b * wt;
            }
        }
    }
    Ok(acc)
}

/// Alice's outcome density p(ξ), the Wigner function smoothed by her marginal:
/// the s-ordered quasidistribution at s = −σ.
pub fn alice_outcome_density<T: Real, S: QuantumState<T> + ?Sized>(state: &S, t: T, xi: ComplexAmplitude<T>) -> Result<T> {
    require_positive(t)?;
    let order = OrderParam::new(-marginal_width(t))?;
    Ok(s_quasidist_series(state, order, xi, T::lit(1e-16)))
}

/// One measurement outcome with its density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSample<T> {
    pub xi: ComplexAmplitude<T>,
    pub weight: T,
}

/// Threshold below which an outcome is treated as impossible.
pub const CONDITIONING_FLOOR: f64 = 1e-12;

/// Default resolution per axis of the outcome sampler.
pub const SAMPLER_RES: usize = 512;

fn trapezoid<T: Real>(n: usize) -> impl Fn(usize) -> T {
    move |i| if i == 0 || i + 1 == n { T::lit(0.5) } else { T::one() }
}

/// K[i, a] = f(out[i], inp[a]) row-major.
fn kernel<T: Real>(out: &[T], inp: &[T], f: impl Fn(T, T) -> T + Sync) -> Vec<T> {
    let mut k = vec![T::zero(); out.len() * inp.len()];
    k.par_chunks_mut(inp.len()).enumerate().for_each(|(i, row)| {
        for (a, v) in row.iter_mut().enumerate() {
            *v = f(out[i], inp[a]);
        }
    });
    k
}

/// K₁ W K₂ᵀ with W of shape n1 × n2.
fn sandwich<T: Real>(k1: &[T], w: &[T], k2: &[T], n1: usize, n2: usize) -> Vec<T> {
    let o1 = k1.len() / n1;
    let o2 = k2.len() / n2;
    // u = W K₂ᵀ : n1 × o2
    let mut u = vec![T::zero(); n1 * o2];
    u.par_chunks_mut(o2).enumerate().for_each(|(a, row)| {
        let wa = &w[a * n2..(a + 1) * n2];
        for (j, v) in row.iter_mut().enumerate() {
            let kj = &k2[j * n2..(j + 1) * n2];
            *v = wa.iter().zip(kj).fold(T::zero(), |s, (x, y)| s + *x * *y);
        }
    });
    let mut out = vec![T::zero(); o1 * o2];
    out.par_chunks_mut(o2).enumerate().for_each(|(i, row)| {
        let ki = &k1[i * n1..(i + 1) * n1];
        for (a, &kv) in ki.iter().enumerate() {
            if kv == T::zero() {
                continue;
            }
            for (o, x) in row.iter_mut().zip(&u[a * o2..(a + 1) * o2]) {
                *o += kv * *x;
            }
        }
    });
    out
}

/// Precomputed input Wigner grid and geometry for evaluating p(ξ) and the
/// conditional outputs by separable Gaussian quadrature.
#[derive(Debug, Clone)]
pub struct Teleporter<T> {
    t: T,
    sigma: T,
    input: PhaseGrid<T>,
    /// W(ν_a, ν_b) times trapezoid weights and the d²ν cell measure
    weighted: Vec<T>,
    nu1: Vec<T>,
    nu2: Vec<T>,
    mean: ComplexAmplitude<T>,
}

impl<T: Real> Teleporter<T> {
    pub fn new<S: QuantumState<T> + ?Sized>(state: &S, t: T) -> Result<Self> {
        require_positive(t)?;
        let h = T::lit(0.1).min(T::lit(0.5) * (t / T::lit(2.0)).sqrt());
        let input = wigner_grid(state, &auto_grid(state, h)?);
        let (n1, n2) = input.resolution;
        let w1 = trapezoid::<T>(n1);
        let w2 = trapezoid::<T>(n2);
        let cell = input.cell_measure();
        let weighted = (0..n1 * n2).map(|ab| input.values[ab] * w1(ab / n2) * w2(ab % n2) * cell).collect();
        Ok(Teleporter {
            t,
            sigma: marginal_width(t),
            nu1: input.axis1(),
            nu2: input.axis2(),
            mean: quad_moments(state).mean(),
            input,
            weighted,
        })
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// The input Wigner grid the quadratures run over.
    pub fn input_grid(&self) -> &PhaseGrid<T> {
        &self.input
    }

    fn input_half(&self) -> T {
        self.input.half_width.0.max(self.input.half_width.1)
    }

    /// p(ξ) by the same quadrature as the conditional outputs.
    pub fn outcome_density(&self, xi: ComplexAmplitude<T>) -> T {
        let s = self.sigma;
        let (n1, n2) = self.input.resolution;
        let k1: Vec<T> = self.nu1.iter().map(|&v| (-(xi.q1 - v).powi(2) / s).exp()).collect();
        let k2: Vec<T> = self.nu2.iter().map(|&v| (-(xi.q2 - v).powi(2) / s).exp()).collect();
        let rows = (0..n1).map(|a| {
            let r = &self.weighted[a * n2..(a + 1) * n2];
            k1[a] * r.iter().zip(&k2).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
        });
        T::lit(2.0) / (T::PI() * s) * compensated_sum(rows)
    }

    /// p(ξ) on `grid` (all nodes at once).
    pub fn outcome_grid(&self, grid: &PhaseGrid<T>) -> PhaseGrid<T> {
        let s = self.sigma;
        let k1 = kernel(&grid.axis1(), &self.nu1, |x, v| (-(x - v).powi(2) / s).exp());
        let k2 = kernel(&grid.axis2(), &self.nu2, |x, v| (-(x - v).powi(2) / s).exp());
        let vals = sandwich(&k1, &self.weighted, &k2, self.nu1.len(), self.nu2.len());
        let pref = T::lit(2.0) / (T::PI() * s);
        let mut out = grid.clone();
        out.values = vals.into_iter().map(|v| v * pref).collect();
        out
    }

    /// Grid on which the conditional output for `xi` is concentrated.
    pub fn conditional_grid(&self, xi: ComplexAmplitude<T>) -> Result<PhaseGrid<T>> {
        let t = self.t;
        let den = T::lit(4.0) + t * t;
        let pull = T::lit(2.0) * t * t / den;
        let shrink = (T::lit(4.0) - t * t).abs() / den;
        let sd = (T::lit(2.0) * t / den).sqrt();
        let c = self.mean.scale(T::one() - pull) + xi.scale(pull);
        let half = self.input_half() * shrink + T::lit(6.0) * sd + T::lit(0.5);
        PhaseGrid::with_spacing(c, half, T::lit(0.1).min(sd / T::lit(2.0)))
    }

    /// Grid covering the averaged output and the bulk of all conditional outputs.
    pub fn average_grid(&self) -> Result<PhaseGrid<T>> {
        let t = self.t;
        let den = T::lit(4.0) + t * t;
        let pull = T::lit(2.0) * t * t / den;
        let shrink = ((T::lit(4.0) - t * t).abs() / den).max(T::one());
        let sd = (T::lit(2.0) * t / den).sqrt();
        let spread = pull * T::lit(5.0) * (self.sigma / T::lit(2.0)).sqrt();
        let half = (self.input_half() * shrink + spread + T::lit(6.0) * sd)
            .max(self.input_half() + T::lit(6.0) * (t / T::lit(2.0)).sqrt());
        // the average is at least as smooth as one conditional output
        PhaseGrid::with_spacing(self.mean, half, T::lit(0.2).min(sd / T::lit(3.0)))
    }

    /// Wigner function of the output given outcome ξ, on `grid`:
    /// (4/π²p(ξ))∫d²ν W(ν) e^{−2|β−ν|²/t − t|β+ν−2ξ|²/2}.
    pub fn conditional_on(&self, xi: ComplexAmplitude<T>, grid: &PhaseGrid<T>) -> Result<PhaseGrid<T>> {
        let p = self.outcome_density(xi);
        if !(p.f64() > CONDITIONING_FLOOR) {
            return Err(Error::Conditioning { density: p.f64(), threshold: CONDITIONING_FLOOR });
        }
        let t = self.t;
        let q = T::lit(4.0);
        let k1 = kernel(&grid.axis1(), &self.nu1, |b, v| (-(b - v).powi(2) / t - t * (b + v - T::lit(2.0) * xi.q1).powi(2) / q).exp());
        let k2 = kernel(&grid.axis2(), &self.nu2, |b, v| (-(b - v).powi(2) / t - t * (b + v - T::lit(2.0) * xi.q2).powi(2) / q).exp());
        let vals = sandwich(&k1, &self.weighted, &k2, self.nu1.len(), self.nu2.len());
        let pref = T::lit(4.0) * T::FRAC_1_PI() * T::FRAC_1_PI() / p;
        let mut out = grid.clone();
        out.values = vals.into_iter().map(|v| v * pref).collect();
        Ok(out)
    }

    pub fn conditional(&self, xi: ComplexAmplitude<T>) -> Result<PhaseGrid<T>> {
        self.conditional_on(xi, &self.conditional_grid(xi)?)
    }

    /// Inverse-CDF sampler for p(ξ) on a `res` × `res` grid.
    pub fn sampler(&self, res: usize) -> Result<OutcomeSampler<T>> {
        let half = self.input_half() + T::lit(7.0) * (self.sigma / T::lit(2.0)).sqrt();
        let grid = PhaseGrid::new(self.mean, (half, half), (res, res))?;
        OutcomeSampler::from_density(self.outcome_grid(&grid))
    }
}

/// Conditional output Wigner function on a default grid around its support.
pub fn conditional_output<T: Real, S: QuantumState<T> + ?Sized>(state: &S, t: T, xi: ComplexAmplitude<T>) -> Result<PhaseGrid<T>> {
    Teleporter::new(state, t)?.conditional(xi)
}

/// Piecewise-constant sampler over grid cells.
#[derive(Debug, Clone)]
pub struct OutcomeSampler<T> {
    density: PhaseGrid<T>,
    cdf: Vec<T>,
    mass: T,
}

impl<T: Real> OutcomeSampler<T> {
    /// Cells carry the mean of their corner values; fails if the grid holds
    /// less than 0.999 of the probability.
    pub fn from_density(density: PhaseGrid<T>) -> Result<Self> {
        let (n1, n2) = density.resolution;
        let cell = density.cell_measure();
        let at = |i: usize, j: usize| density.values[i * n2 + j].max(T::zero());
        let masses: Vec<T> = (0..(n1 - 1) * (n2 - 1))
            .map(|ij| {
                let (i, j) = (ij / (n2 - 1), ij % (n2 - 1));
                (at(i, j) + at(i + 1, j) + at(i, j + 1) + at(i + 1, j + 1)) / T::lit(4.0) * cell
            })
            .collect();
        let mut acc = Neumaier::<T>::default();
        let cdf: Vec<T> = masses
            .iter()
            .map(|&m| {
                acc.add(m);
                acc.sum()
            })
            .collect();
        let mass = acc.sum();
        if mass.f64() < 0.999 {
            return Err(Error::Sampling { mass: mass.f64() });
        }
        Ok(OutcomeSampler { density, cdf, mass })
    }

    /// Probability captured by the grid.
    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn density(&self) -> &PhaseGrid<T> {
        &self.density
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> OutcomeSample<T> {
        let u = T::lit(rng.gen::<f64>()) * self.mass;
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let n2c = self.density.resolution.1 - 1;
        let (i, j) = (idx / n2c, idx % n2c);
        let (h1, h2) = self.density.spacing();
        let corner = self.density.point(i, j);
        let xi = ComplexAmplitude::new(
            corner.q1 + h1 * T::lit(rng.gen::<f64>()),
            corner.q2 + h2 * T::lit(rng.gen::<f64>()),
        );
        let cell = self.density.cell_measure();
        let prev = if idx == 0 { T::zero() } else { self.cdf[idx - 1] };
        OutcomeSample { xi, weight: (self.cdf[idx] - prev) / cell }
    }
}

/// Draws one outcome for `state` at squeezing t with the default sampler.
pub fn sample_outcome<T: Real, S: QuantumState<T> + ?Sized, R: Rng + ?Sized>(
    state: &S,
    t: T,
    rng: &mut R,
) -> Result<OutcomeSample<T>> {
    Teleporter::new(state, t)?.sampler(SAMPLER_RES).map(|s| s.sample(rng))
}

/// One Monte Carlo trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub index: usize,
    pub xi: ComplexAmplitude<T>,
    pub density: T,
    /// π∫d²β W_in W_out(·|ξ), the fidelity ⟨ψ|ρ_out(ξ)|ψ⟩ for pure inputs
    pub fidelity: T,
}

/// Empirical average of conditional outputs.
#[derive(Debug, Clone)]
pub struct McReport<T> {
    pub average: PhaseGrid<T>,
    pub trajectories: Vec<Trajectory<T>>,
    pub mean_fidelity: T,
    pub fidelity_std_err: T,
}

/// Samples per reproducible substream.
pub const MC_CHUNK: usize = 256;

/// Averages `samples` conditional outputs on `grid` (default: the teleporter's
/// average grid). Chunk c draws from substream c of `seed`, and chunk sums are
/// reduced in chunk order, so results do not depend on scheduling.
pub fn mc_average<T: Real, S: QuantumState<T> + ?Sized>(
    state: &S,
    t: T,
    samples: usize,
    seed: u64,
    grid: Option<PhaseGrid<T>>,
) -> Result<McReport<T>> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let tp = Teleporter::new(state, t)?;
    let grid = match grid {
        Some(g) => g,
        None => tp.average_grid()?,
    };
    let sampler = tp.sampler(SAMPLER_RES)?;
    let w_in = wigner_grid(state, &grid);
    let chunks = samples.div_ceil(MC_CHUNK);
    // (summed conditional output, trajectories) per chunk
    type Chunk<T> = (Vec<T>, Vec<Trajectory<T>>);
    let per_chunk: Vec<Result<Chunk<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let lo = c * MC_CHUNK;
            let hi = samples.min(lo + MC_CHUNK);
            let mut sum = vec![T::zero(); grid.values.len()];
            let mut traj = Vec::with_capacity(hi - lo);
            for index in lo..hi {
                let s = sampler.sample(&mut rng);
                let out = tp.conditional_on(s.xi, &grid)?;
                let mut prod = out.clone();
                for (p, w) in prod.values.iter_mut().zip(&w_in.values) {
                    *p *= *w;
                }
                traj.push(Trajectory {
                    index,
                    xi: s.xi,
                    density: tp.outcome_density(s.xi),
                    fidelity: T::PI() * prod.integral(),
                });
                for (a, v) in sum.iter_mut().zip(&out.values) {
                    *a += *v;
                }
            }
            Ok((sum, traj))
        })
        .collect();
    let mut acc: Vec<Neumaier<T>> = vec![Neumaier::default(); grid.values.len()];
    let mut trajectories = Vec::with_capacity(samples);
    for r in per_chunk {
        let (sum, traj) = r?;
        for (a, v) in acc.iter_mut().zip(sum) {
            a.add(v);
        }
        trajectories.extend(traj);
    }
    let inv = T::one() / T::of(samples);
    let mut average = grid.clone();
    average.values = acc.iter().map(|a| a.sum() * inv).collect();
    let fids: Vec<T> = trajectories.iter().map(|tr| tr.fidelity).collect();
    let mean = compensated_sum(fids.iter().cloned()) * inv;
    let var = if samples > 1 {
        compensated_sum(fids.iter().map(|f| (*f - mean).powi(2))) / T::of(samples - 1)
    } else {
        T::zero()
    };
    Ok(McReport { average, trajectories, mean_fidelity: mean, fidelity_std_err: (var * inv).sqrt() })
}

/// ∫d²β |a − b| over two grids of equal geometry.
pub fn l1_distance<T: Real>(a: &PhaseGrid<T>, b: &PhaseGrid<T>) -> T {
    let mut d = a.clone();
    for (x, y) in d.values.iter_mut().zip(&b.values) {
        *x = (*x - *y).abs();
    }
    d.integral()
}

/// 1 − π∫d²β W_a W_b, i.e. 1 − tr(ρ_a ρ_b): the fidelity deficit when one
/// of the two states is pure.
pub fn overlap_deficit<T: Real>(a: &PhaseGrid<T>, b: &PhaseGrid<T>) -> T {
    let mut d = a.clone();
    for (x, y) in d.values.iter_mut().zip(&b.values) {
        *x *= *y;
    }
    T::one() - T::PI() * d.integral()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::{coherent_fidelity, fidelity_quadrature, FidelityForm};
    use crate::fock::*;
    use crate::phasespace::{char_fn, husimi, wigner};
    use approx::assert_relative_eq;

    fn amp(a: f64, b: f64) -> ComplexAmplitude<f64> {
        ComplexAmplitude::new(a, b)
    }

    #[test]
    fn epr_factorises() {
        let t = 0.7;
        for &(a, b) in &[(amp(0.3, -0.2), amp(0.1, 0.5)), (amp(-1.0, 0.4), amp(0.9, 0.0))] {
            let direct = epr_wigner(t, a, b).unwrap();
            let fact = 2.0 * t * p_dist(t, b + a.conj()).unwrap() * p_tilde(t, b - a.conj());
            assert_relative_eq!(direct, fact, max_relative = 1e-12);
        }
        assert_relative_eq!(epr_wigner(1.0, amp(0.0, 0.0), amp(0.0, 0.0)).unwrap(), 4.0 / std::f64::consts::PI.powi(2));
        // t = 2: product of two vacuum Wigner functions (2/π)e^{−2|α|²}
        let (a, b) = (amp(0.4, -0.3), amp(-0.2, 0.6));
        let vac = |z: ComplexAmplitude<f64>| 2.0 / std::f64::consts::PI * (-2.0 * z.norm_sqr()).exp();
        assert_relative_eq!(epr_wigner(2.0, a, b).unwrap(), vac(a) * vac(b), max_relative = 1e-12);
    }

    #[test]
    fn vacuum_becomes_thermal() {
        let v = make_number::<f64>(0, 4).unwrap();
        let t = 0.8;
        let out = average_channel(&v, t).unwrap();
        let nbar: f64 = t / 2.0;
        let th = make_thermal_tol(ThermalParams::from_nbar(nbar).unwrap(), out.dim(), 1.0).unwrap();
        assert!(out.matrix().max_abs_diff(th.matrix()) < 1e-12);
    }

    #[test]
    fn channel_multiplies_char_fn() {
        let s = make_compass(1.5f64, 40).unwrap();
        let t = 0.6;
        let out = average_channel(&s, t).unwrap();
        for k in 0..20 {
            let mu = ComplexAmplitude::from_polar(0.15 * k as f64, 0.7 * k as f64);
            let lhs = char_fn(&out, mu);
            let rhs = char_fn(&s, mu) * (-t * mu.norm_sqr() / 2.0).exp();
            assert!((lhs - rhs).norm() < 1e-10, "{k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn channel_fidelity_matches_form_four() {
        let s = make_number::<f64>(2, 16).unwrap();
        let out = average_channel(&s, 1.1).unwrap();
        let f = out.expectation_in(&s.resized(out.dim()).unwrap());
        let q = fidelity_quadrature(&s, SqueezeParam::from_t(1.1).unwrap(), FidelityForm::Four).unwrap();
        assert!((f - q).abs() < 1e-12);
    }

    #[test]
    fn channel_against_hermite_quadrature() {
        let s = make_number::<f64>(1, 6).unwrap();
        let t = 0.5;
        let exact = average_channel(&s, t).unwrap();
        let gh = average_channel_gh(&s, t, 40, exact.dim()).unwrap();
        assert!(exact.matrix().max_abs_diff(&gh) < 1e-8);
    }

    #[test]
    fn outcome_density_heterodyne_limit() {
        let s = make_compass(1.0f64, 32).unwrap();
        for &xi in &[amp(0.0, 0.0), amp(0.7, -0.4), amp(-1.3, 0.2)] {
            let p = alice_outcome_density(&s, 2.0, xi).unwrap();
            assert!((p - husimi(&s, xi)).abs() < 1e-12);
        }
        let tp = Teleporter::new(&s, 2.0).unwrap();
        assert!((tp.outcome_density(amp(0.7, -0.4)) - husimi(&s, amp(0.7, -0.4))).abs() < 1e-8);
    }

    #[test]
    fn conditional_output_normalised_and_centred() {
        let nu = amp(0.8, -0.5);
        let s = make_coherent(nu, 32).unwrap();
        let xi = nu;
        let w = conditional_output(&s, 2.0, xi).unwrap();
        assert!((w.integral() - 1.0).abs() < 1e-3);
        // coherent input: output centred at (m(4−t²) + 2t²ξ)/(4+t²) = ξ for t = 2, ξ = m
        let (i, j) = (0..w.values.len()).map(|k| (k / w.resolution.1, k % w.resolution.1)).max_by(|a, b| w.get(a.0, a.1).partial_cmp(w.get(b.0, b.1)).unwrap()).unwrap();
        let p = w.point(i, j);
        assert!((p.q1 - xi.q1).abs() < 0.1 && (p.q2 - xi.q2).abs() < 0.1);
    }

    #[test]
    fn conditioning_error_far_out() {
        let s = make_number::<f64>(0, 4).unwrap();
        assert!(matches!(conditional_output(&s, 1.0, amp(80.0, 0.0)), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn average_of_conditionals_reproduces_convolution() {
        let s = make_number::<f64>(1, 8).unwrap();
        let t = 1.0;
        let out = average_channel(&s, t).unwrap();
        let grid: PhaseGrid<f64> = PhaseGrid::new(ComplexAmplitude::zero(), (3.0, 3.0), (9, 9)).unwrap();
        let order = OrderParam::new(-t).unwrap();
        for k in 0..grid.values.len() {
            let b = grid.point(k / 9, k % 9);
            let lhs = wigner(&out, b);
            let rhs = s_quasidist_series(&s, order, b, 1e-16);
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn mc_reproducible_and_single_sample() {
        let s = make_coherent(amp(0.5, 0.0), 24).unwrap();
        let a = mc_average(&s, 1.0, 3, 11, None).unwrap();
        let b = mc_average(&s, 1.0, 3, 11, None).unwrap();
        assert_eq!(a.average.values, b.average.values);
        let one = mc_average(&s, 1.0, 1, 5, None).unwrap();
        let tp = Teleporter::new(&s, 1.0).unwrap();
        let direct = tp.conditional_on(one.trajectories[0].xi, &one.average).unwrap();
        assert_eq!(one.average.values, direct.values);
        assert!(one.trajectories[0].fidelity > 0.0 && one.mean_fidelity <= coherent_fidelity(0.0));
    }
}
