//! Split-operator evolution on a position grid and projection onto the Fock basis.

use crate::error::{Error, Result};
use crate::fock::PureState;
use crate::scalar::{Real, C};
use crate::special::compensated_sum;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

/// Amplitude of the driving term in the double-well model.
pub const DRIVE: f64 = 65.0;

/// Largest tolerated probability in the outer grid strips during evolution.
pub const EDGE_LIMIT: f64 = 1e-10;

/// Largest tolerated Fock leakage for a projection.
pub const LEAKAGE_LIMIT: f64 = 1e-3;

/// Uniform position grid x_k = x_min + k·dx, k < n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XGrid<T> {
    pub x_min: T,
    pub dx: T,
    pub n_points: usize,
}

impl<T: Real> XGrid<T> {
    /// n points covering [lo, hi) periodically.
    pub fn new(lo: T, hi: T, n_points: usize) -> Result<Self> {
        if !(hi > lo) || n_points < 4 {
            return Err(Error::invalid("position grid needs hi > lo and at least 4 points"));
        }
        Ok(XGrid { x_min: lo, dx: (hi - lo) / T::of(n_points), n_points })
    }

    pub fn x(&self, k: usize) -> T {
        self.x_min + self.dx * T::of(k)
    }

    pub fn x_max(&self) -> T {
        self.x(self.n_points - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n_points).map(move |k| self.x(k))
    }

    /// FFT-ordered wavenumbers.
    pub fn wavenumbers(&self) -> Vec<T> {
        let n = self.n_points;
        let dk = T::TAU() / (self.dx * T::of(n));
        (0..n).map(|k| if k < n.div_ceil(2) { dk * T::of(k) } else { -dk * T::of(n - k) }).collect()
    }
}

impl Default for XGrid<f64> {
    fn default() -> Self {
        XGrid::new(-30.0, 30.0, 4096).expect("valid default grid")
    }
}

/// Wave function sampled on an [`XGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction<T> {
    pub grid: XGrid<T>,
    pub samples: Vec<C<T>>,
}

impl<T: Real> WaveFunction<T> {
    pub fn norm_sqr(&self) -> T {
        compensated_sum(self.samples.iter().map(|z| z.norm_sqr())) * self.grid.dx
    }

    /// Probability within the outer `n_points/32` samples at each end.
    pub fn edge_mass(&self) -> T {
        let n = self.samples.len();
        let w = (n / 32).max(1);
        let s = self.samples[..w].iter().chain(&self.samples[n - w..]).map(|z| z.norm_sqr());
        compensated_sum(s) * self.grid.dx
    }

    /// Largest |ψ|² at the two end points.
    pub fn boundary_density(&self) -> T {
        self.samples[0].norm_sqr().max(self.samples[self.samples.len() - 1].norm_sqr())
    }

    /// ⟨self|other⟩ by the rectangle rule.
    pub fn inner(&self, other: &Self) -> C<T> {
        let re = compensated_sum(self.samples.iter().zip(&other.samples).map(|(a, b)| (a.conj() * b).re));
        let im = compensated_sum(self.samples.iter().zip(&other.samples).map(|(a, b)| (a.conj() * b).im));
        C::new(re, im) * self.grid.dx
    }

    /// ⟨x⟩, ⟨p⟩, (Δx)², (Δp)², with p from the spectral derivative.
    pub fn moments(&self) -> (T, T, T, T)
    where
        T: FftNum,
    {
        let dx = self.grid.dx;
        let xs: Vec<T> = self.grid.points().collect();
        let rho: Vec<T> = self.samples.iter().map(|z| z.norm_sqr()).collect();
        let m0 = compensated_sum(rho.iter().cloned()) * dx;
        let mx = compensated_sum(rho.iter().zip(&xs).map(|(r, x)| *r * *x)) * dx / m0;
        let mxx = compensated_sum(rho.iter().zip(&xs).map(|(r, x)| *r * *x * *x)) * dx / m0;
        let n = self.samples.len();
        let mut buf = self.samples.clone();
        let mut planner = FftPlanner::<T>::new();
        planner.plan_fft_forward(n).process(&mut buf);
        let ks = self.grid.wavenumbers();
        let pk: Vec<T> = buf.iter().map(|z| z.norm_sqr()).collect();
        let p0 = compensated_sum(pk.iter().cloned());
        let mp = compensated_sum(pk.iter().zip(&ks).map(|(a, k)| *a * *k)) / p0;
        let mpp = compensated_sum(pk.iter().zip(&ks).map(|(a, k)| *a * *k * *k)) / p0;
        (mx, mp, mxx - mx * mx, mpp - mp * mp)
    }
}

/// π^{−1/4}exp(−(x−x0)²/2 + i p0 x), requiring x0 ± 5 inside the grid.
pub fn coherent_wavefunction<T: Real>(x0: T, p0: T, grid: XGrid<T>) -> Result<WaveFunction<T>> {
    let five = T::lit(5.0);
    if x0 - five < grid.x_min || x0 + five > grid.x_max() {
        return Err(Error::GridExtent {
            what: format!("coherent state at x0 = {} needs [{}, {}] inside the grid", x0.f64(), (x0 - five).f64(), (x0 + five).f64()),
        });
    }
    let pre = T::PI().powf(T::lit(-0.25));
    let samples = grid
        .points()
        .map(|x| {
            let r = pre * (-(x - x0).powi(2) / T::lit(2.0)).exp();
            C::from_polar(r, p0 * x)
        })
        .collect();
    Ok(WaveFunction { grid, samples })
}

/// Which Hamiltonian to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    /// 5p² − 8x² + 0.05x⁴ + 65x cos(2πτ)
    DrivenDoubleWell,
    /// p²/2 + x²/2, used to validate the integrator
    Harmonic,
}

impl Model {
    fn kinetic<T: Real>(self) -> T {
        match self {
            Model::DrivenDoubleWell => T::lit(5.0),
            Model::Harmonic => T::lit(0.5),
        }
    }

    /// Time-independent part of the potential.
    fn static_potential<T: Real>(self, x: T) -> T {
        match self {
            Model::DrivenDoubleWell => -T::lit(8.0) * x * x + T::lit(0.05) * x.powi(4),
            Model::Harmonic => x * x / T::lit(2.0),
        }
    }

    /// Coefficient of x in the potential at time τ.
    fn drive<T: Real>(self, tau: T) -> T {
        match self {
            Model::DrivenDoubleWell => T::lit(DRIVE) * (T::TAU() * tau).cos(),
            Model::Harmonic => T::zero(),
        }
    }
}

/// Step size, duration and model for an evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig<T> {
    pub dt: T,
    pub t_final: T,
    pub grid: XGrid<T>,
    pub model: Model,
}

impl<T: Real> EvolutionConfig<T> {
    /// Rejects dt ≤ 0 and durations that are not a whole number of steps.
    pub fn new(dt: T, t_final: T, grid: XGrid<T>, model: Model) -> Result<Self> {
        if !(dt > T::zero()) || !(t_final >= T::zero()) {
            return Err(Error::invalid("need dt > 0 and t_final ≥ 0"));
        }
        let c = EvolutionConfig { dt, t_final, grid, model };
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) * (T::one() + t_final) {
            return Err(Error::invalid(format!("t_final = {} is not a multiple of dt = {}", t_final.f64(), dt.f64())));
        }
        Ok(c)
    }

    /// `steps` equal steps over [0, t_final].
    pub fn with_steps(t_final: T, steps: usize, grid: XGrid<T>, model: Model) -> Result<Self> {
        if steps == 0 {
            return Self::new(T::one(), T::zero(), grid, model);
        }
        Self::new(t_final / T::of(steps), t_final, grid, model)
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().to_usize().unwrap_or(0)
    }
}

impl Default for EvolutionConfig<f64> {
    fn default() -> Self {
        EvolutionConfig { dt: 2.5e-4, t_final: 5.0, grid: XGrid::default(), model: Model::DrivenDoubleWell }
    }
}

/// Result of an evolution with its diagnostics.
#[derive(Debug, Clone)]
pub struct Evolution<T> {
    pub state: WaveFunction<T>,
    /// |‖ψ(t_final)‖² − ‖ψ(0)‖²|
    pub norm_drift: T,
    pub max_edge_mass: T,
    pub steps: usize,
    pub snapshots: Vec<(T, WaveFunction<T>)>,
}

/// Strang splitting: half potential kick, full kinetic drift, half kick, with
/// the drive evaluated at the midpoint of each step. Snapshots are kept every
/// `stride` steps (never when `stride` is 0).
pub fn evolve<T: Real + FftNum>(psi: &WaveFunction<T>, config: &EvolutionConfig<T>, stride: usize) -> Result<Evolution<T>> {
    if psi.grid != config.grid {
        return Err(Error::invalid("wave function and configuration use different grids"));
    }
    let n = psi.samples.len();
    let steps = config.steps();
    let dt = config.dt;
    let half = dt / T::lit(2.0);
    let xs: Vec<T> = config.grid.points().collect();
    let v0: Vec<T> = xs.iter().map(|&x| config.model.static_potential(x)).collect();
    let kin: T = config.model.kinetic();
    let drift: Vec<C<T>> = config.grid.wavenumbers().iter().map(|&k| C::from_polar(T::one() / T::of(n), -kin * k * k * dt)).collect();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut scratch = vec![C::new(T::zero(), T::zero()); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];

    let norm0 = psi.norm_sqr();
    let mut cur = psi.clone();
    let mut max_edge = cur.edge_mass();
    let mut snapshots = Vec::new();
    if stride > 0 {
        snapshots.push((T::zero(), cur.clone()));
    }
    let mut kick = vec![C::new(T::zero(), T::zero()); n];
    for step in 0..steps {
        let tau = dt * (T::of(step) + T::lit(0.5));
        let g = config.model.drive(tau);
        for ((kv, &x), &v) in kick.iter_mut().zip(&xs).zip(&v0) {
            *kv = C::from_polar(T::one(), -(v + g * x) * half);
        }
        for (s, k) in cur.samples.iter_mut().zip(&kick) {
            *s *= k;
        }
        fwd.process_with_scratch(&mut cur.samples, &mut scratch);
        for (s, d) in cur.samples.iter_mut().zip(&drift) {
            *s *= d;
        }
        inv.process_with_scratch(&mut cur.samples, &mut scratch);
        for (s, k) in cur.samples.iter_mut().zip(&kick) {
            *s *= k;
        }
        let edge = cur.edge_mass();
        max_edge = max_edge.max(edge);
        if edge.f64() > EDGE_LIMIT {
            return Err(Error::BoundaryLeak { step: step + 1, edge_mass: edge.f64() });
        }
        if stride > 0 && (step + 1) % stride == 0 {
            snapshots.push((dt * T::of(step + 1), cur.clone()));
        }
    }
    let norm_drift = (cur.norm_sqr() - norm0).abs();
    Ok(Evolution { state: cur, norm_drift, max_edge_mass: max_edge, steps, snapshots })
}

/// Evolution from the coherent state at (x, p) = (−8, 4) over 0 ≤ τ ≤ 5.
pub fn evolve_chaotic<T: Real + FftNum>(psi: &WaveFunction<T>, config: &EvolutionConfig<T>) -> Result<WaveFunction<T>> {
    evolve(psi, config, 0).map(|e| e.state)
}

/// Hermite functions ⟨x|n⟩ for n < count on the grid, row n contiguous.
pub fn hermite_functions<T: Real>(grid: &XGrid<T>, count: usize) -> Vec<T> {
    let m = grid.n_points;
    let mut out = vec![T::zero(); count * m];
    let pre = T::PI().powf(T::lit(-0.25));
    for (k, x) in grid.points().enumerate() {
        let mut prev = T::zero();
        let mut cur = pre * (-x * x / T::lit(2.0)).exp();
        for n in 0..count {
            out[n * m + k] = cur;
            let nf = T::of(n);
            let next = (T::lit(2.0) / (nf + T::one())).sqrt() * x * cur - (nf / (nf + T::one())).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    out
}

/// Fock coefficients ⟨n|ψ⟩ for n < count.
pub fn fock_coefficients<T: Real>(psi: &WaveFunction<T>, count: usize) -> Vec<C<T>> {
    let h = hermite_functions(&psi.grid, count);
    let m = psi.grid.n_points;
    (0..count)
        .map(|n| {
            let row = &h[n * m..(n + 1) * m];
            let re = compensated_sum(row.iter().zip(&psi.samples).map(|(a, b)| *a * b.re));
            let im = compensated_sum(row.iter().zip(&psi.samples).map(|(a, b)| *a * b.im));
            C::new(re, im) * psi.grid.dx
        })
        .collect()
}

/// Normalised Fock-space state with its measured leakage 1 − Σ|⟨n|ψ⟩|².
#[derive(Debug, Clone)]
pub struct FockProjection<T> {
    pub state: PureState<T>,
    pub leakage: T,
}

/// Projects onto the first `dim` number states; fails if more than 1e−3 of the
/// norm is lost.
pub fn wavefunction_to_fock<T: Real>(psi: &WaveFunction<T>, dim: usize) -> Result<FockProjection<T>> {
    let c = fock_coefficients(psi, dim);
    project(c, psi.norm_sqr())
}

fn project<T: Real>(c: Vec<C<T>>, norm: T) -> Result<FockProjection<T>> {
    let dim = c.len();
    let kept = compensated_sum(c.iter().map(|z| z.norm_sqr()));
    let leakage = (norm - kept) / norm;
    if leakage.f64() > LEAKAGE_LIMIT {
        return Err(Error::Leakage { leakage: leakage.f64(), limit: LEAKAGE_LIMIT, dim });
    }
    Ok(FockProjection { state: PureState::from_coeffs(c)?.with_canonical_phase(), leakage: leakage.max(T::zero()) })
}

/// Smallest dimension up to `max_dim` whose leakage is at most `tol`.
pub fn fock_dim_for<T: Real>(psi: &WaveFunction<T>, tol: T, max_dim: usize) -> Result<FockProjection<T>> {
    let c = fock_coefficients(psi, max_dim);
    let norm = psi.norm_sqr();
    let mut acc = T::zero();
    for (n, z) in c.iter().enumerate() {
        acc += z.norm_sqr();
        if (norm - acc) / norm <= tol {
            return project(c[..=n].to_vec(), norm);
        }
    }
    Err(Error::Leakage { leakage: ((norm - acc) / norm).f64(), limit: tol.f64(), dim: max_dim })
}

/// Leakage aimed for by [`fock_projection`] before falling back to [`LEAKAGE_LIMIT`].
pub const PROJECTION_TARGET: f64 = 1e-10;

/// Projection used by the pipelines: the smallest dimension reaching 1e−10
/// leakage, or failing that the smallest within the 1e−3 limit. The looser
/// cut visibly biases second moments (about 4% for a coherent state), hence
/// the tighter target.
pub fn fock_projection<T: Real>(psi: &WaveFunction<T>, max_dim: usize) -> Result<FockProjection<T>> {
    fock_dim_for(psi, T::lit(PROJECTION_TARGET), max_dim).or_else(|_| fock_dim_for(psi, T::lit(LEAKAGE_LIMIT), max_dim))
}

/// Wave function Σ_n c_n⟨x|n⟩ on `grid`.
pub fn fock_to_wavefunction<T: Real>(state: &PureState<T>, grid: XGrid<T>) -> WaveFunction<T> {
    let dim = state.dim();
    let h = hermite_functions(&grid, dim);
    let m = grid.n_points;
    let samples = (0..m)
        .map(|k| state.coeffs().iter().enumerate().fold(C::new(T::zero(), T::zero()), |acc, (n, c)| acc + *c * h[n * m + k]))
        .collect();
    WaveFunction { grid, samples }
}

/// Dimension whose random-state ensemble has mean (Δx)² + (Δp)² = (N² + 1)/(N + 1)
/// closest to `var_sum`.
pub fn variance_matched_dim<T: Real>(var_sum: T) -> usize {
    let ens = |n: usize| {
        let nf = T::of(n);
        (nf * nf + T::one()) / (nf + T::one())
    };
    let mut best = 1;
    let mut n = 1;
    while ens(n) <= var_sum + T::lit(2.0) {
        if (ens(n) - var_sum).abs() < (ens(best) - var_sum).abs() {
            best = n;
        }
        n += 1;
    }
    best
}

/// Second-order check: for ψ at dt, dt/2 and dt/4 returns
/// ‖ψ_dt − ψ_{dt/2}‖ / ‖ψ_{dt/2} − ψ_{dt/4}‖, which tends to 4.
pub fn convergence_ratio<T: Real + FftNum>(psi: &WaveFunction<T>, config: &EvolutionConfig<T>) -> Result<T> {
    let run = |div: usize| -> Result<WaveFunction<T>> {
        let c = EvolutionConfig::with_steps(config.t_final, config.steps() * div, config.grid, config.model)?;
        evolve_chaotic(psi, &c)
    };
    let a = run(1)?;
    let b = run(2)?;
    let c = run(4)?;
    let dist = |u: &WaveFunction<T>, v: &WaveFunction<T>| {
        compensated_sum(u.samples.iter().zip(&v.samples).map(|(p, q)| (*p - *q).norm_sqr())).sqrt()
    };
    Ok(dist(&a, &b) / dist(&b, &c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_coherent, make_number, quad_moments, ComplexAmplitude};
    use approx::assert_relative_eq;

    fn small_grid() -> XGrid<f64> {
        XGrid::new(-20.0, 20.0, 1024).unwrap()
    }

    #[test]
    fn vacuum_wavefunction() {
        let g = small_grid();
        let v = coherent_wavefunction(0.0, 0.0, g).unwrap();
        assert_relative_eq!(v.norm_sqr(), 1.0, epsilon = 1e-12);
        let (mx, mp, vx, vp) = v.moments();
        assert!(mx.abs() < 1e-12 && mp.abs() < 1e-12);
        assert_relative_eq!(vx, 0.5, epsilon = 1e-10);
        assert_relative_eq!(vp, 0.5, epsilon = 1e-10);
        let p = wavefunction_to_fock(&v, 8).unwrap();
        assert!(p.leakage < 1e-10 && (p.state.coeffs()[0].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn displaced_moments_and_grid_guard() {
        let g = XGrid::default();
        let w = coherent_wavefunction(-8.0, 4.0, g).unwrap();
        let (mx, mp, vx, vp) = w.moments();
        assert!((mx + 8.0).abs() < 1e-10 && (mp - 4.0).abs() < 1e-10);
        assert!((vx - 0.5).abs() < 1e-10 && (vp - 0.5).abs() < 1e-10);
        assert!(matches!(coherent_wavefunction(27.0, 0.0, g), Err(Error::GridExtent { .. })));
    }

    #[test]
    fn coherent_projection_matches_constructor() {
        let g = XGrid::default();
        let w = coherent_wavefunction(-8.0, 4.0, g).unwrap();
        let p = wavefunction_to_fock(&w, 200).unwrap();
        let c = make_coherent(ComplexAmplitude::new(-8.0, 4.0), 200).unwrap();
        assert!(p.state.overlap(&c) >= 1.0 - 1e-6);
        let q = quad_moments(&p.state);
        assert!((q.mean_x + 8.0).abs() < 1e-6);
    }

    #[test]
    fn tight_projection_restores_moments() {
        let w = coherent_wavefunction(-8.0, 4.0, XGrid::default()).unwrap();
        let loose = fock_dim_for(&w, LEAKAGE_LIMIT, 200).unwrap();
        let tight = fock_projection(&w, 200).unwrap();
        assert!(tight.leakage <= PROJECTION_TARGET && tight.state.dim() > loose.state.dim());
        assert!((quad_moments(&tight.state).var_sum() - 1.0).abs() < 1e-6);
        // only the loose cut is reachable with few levels
        assert!(fock_projection(&w, loose.state.dim()).unwrap().leakage > PROJECTION_TARGET);
    }

    #[test]
    fn number_state_hermite_function() {
        let g = small_grid();
        let s = make_number::<f64>(2, 6).unwrap();
        let w = fock_to_wavefunction(&s, g);
        let p = wavefunction_to_fock(&w, 6).unwrap();
        assert!((p.state.coeffs()[2].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_duration_is_identity() {
        let g = small_grid();
        let w = coherent_wavefunction(1.0, -0.5, g).unwrap();
        let c = EvolutionConfig::with_steps(0.0, 0, g, Model::DrivenDoubleWell).unwrap();
        assert_eq!(evolve_chaotic(&w, &c).unwrap(), w);
    }

    #[test]
    fn harmonic_period_returns() {
        let g = small_grid();
        let w = coherent_wavefunction(2.0, 1.0, g).unwrap();
        let c = EvolutionConfig::with_steps(std::f64::consts::TAU, 25_000, g, Model::Harmonic).unwrap();
        let out = evolve_chaotic(&w, &c).unwrap();
        // zero-point phase e^{−iπ} after one period
        let ov = w.inner(&out);
        assert!((ov.re + 1.0).abs() < 1e-6 && ov.im.abs() < 1e-6, "{ov}");
    }

    #[test]
    fn config_validation() {
        let g = small_grid();
        assert!(EvolutionConfig::new(0.3, 1.0, g, Model::Harmonic).is_err());
        assert!(EvolutionConfig::new(-0.1, 1.0, g, Model::Harmonic).is_err());
        assert_eq!(EvolutionConfig::new(0.25, 1.0, g, Model::Harmonic).unwrap().steps(), 4);
    }

    #[test]
    fn variance_matching() {
        assert_eq!(variance_matched_dim(1.0f64), 1);
        assert_eq!(variance_matched_dim(10001.0 / 101.0f64), 100);
    }
}
