//! Entanglement fidelity of mixed inputs and the two-variable phase-space functions.

use crate::error::{Error, Result};
use crate::fidelity::{radial_mode_integral, ScaleReport};
use crate::fock::{displacement_matrix, displacement_matrix_real, quad_moments, ComplexAmplitude, DensityOp, QuantumState};
use crate::linalg::CMatrix;
use crate::phasespace::Repr;
use crate::quadrature::GaussRule;
use crate::scalar::{cis, Real, C};
use crate::special::compensated_sum;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest dimension for which the doubled space is built explicitly.
pub const MAX_PURIFY_DIM: usize = 32;

/// One sample of a two-variable function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoldEval<T> {
    pub mu: ComplexAmplitude<T>,
    pub alpha: ComplexAmplitude<T>,
    pub value: C<T>,
}

/// 𝚽(μ, α) = tr[ρ D†(μ) ρ D(α)]. Both displacement blocks are only needed on
/// the support of ρ, so the N×N truncation is exact.
pub fn bold_phi<T: Real>(rho: &DensityOp<T>, mu: ComplexAmplitude<T>, alpha: ComplexAmplitude<T>) -> BoldEval<T> {
    let n = rho.dim();
    let r = rho.matrix();
    let dmu = displacement_matrix(mu, n, n).adjoint();
    let da = displacement_matrix(alpha, n, n);
    let left = r * &dmu;
    let right = r * &da;
    BoldEval { mu, alpha, value: left.trace_product(&right) }
}

/// D̃(β) = 2D(2β)Π on the first N levels.
fn parity_displacement<T: Real>(beta: ComplexAmplitude<T>, n: usize) -> CMatrix<T> {
    let d = displacement_matrix(beta.scale(T::lit(2.0)), n, n);
    CMatrix::from_fn(n, n, |i, j| {
        let s = if j % 2 == 1 { -T::lit(2.0) } else { T::lit(2.0) };
        d[(i, j)] * s
    })
}

/// 𝐖(β, ν) = (1/π²)tr[ρ D̃(β) ρ D̃(ν)].
pub fn bold_w<T: Real>(rho: &DensityOp<T>, beta: ComplexAmplitude<T>, nu: ComplexAmplitude<T>) -> T {
    let n = rho.dim();
    let r = rho.matrix();
    let left = r * &parity_displacement(beta, n);
    let right = r * &parity_displacement(nu, n);
    left.trace_product(&right).re * T::FRAC_1_PI() * T::FRAC_1_PI()
}

/// Entanglement fidelity ∫d²μ P̃(μ) 𝚽(μ, μ).
///
/// With μ = √x e^{iθ}, 𝚽 = tr[ρ_θ D(√x)ᵀ ρ_θ D(√x)] where ρ_θ has entries
/// ρ_{ab}e^{i(b−a)θ}; its angular frequencies are bounded by twice the bandwidth
/// w of ρ, so 4w + 2 equispaced angles integrate it exactly. The radial part
/// is e^{−(1+t/2)x} times a polynomial of degree below 2N, handled by Gauss–Laguerre.
pub fn entanglement_fidelity<T: Real>(rho: &DensityOp<T>, t: T) -> Result<T> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::invalid("squeezing t must be finite and ≥ 0"));
    }
    if t == T::zero() {
        return Ok(T::one());
    }
    let n = rho.dim();
    let w = rho.bandwidth();
    let m = 4 * w + 2;
    let k = 64.max(n + 16);
    let rule = GaussRule::<T>::laguerre(k)?;
    let beta = T::one() + t / T::lit(2.0);
    let r = rho.matrix();
    let rotated: Vec<CMatrix<T>> = (0..m)
        .map(|l| {
            let th = T::TAU() * T::of(l) / T::of(m);
            CMatrix::from_fn(n, n, |a, b| r[(a, b)] * cis(th * (T::of(b) - T::of(a))))
        })
        .collect();
    let terms: Vec<T> = rule
        .nodes
        .par_iter()
        .zip(rule.log_weights.par_iter())
        .map(|(&y, &lw)| {
            let x = y / beta;
            if lw + x < T::lit(-700.0) {
                return T::zero();
            }
            let d = displacement_matrix_real(x.sqrt(), n, n);
            let dm = CMatrix::from_fn(n, n, |i, j| C::new(d[i * n + j], T::zero()));
            let dt = CMatrix::from_fn(n, n, |i, j| C::new(d[j * n + i], T::zero()));
            let avg = compensated_sum(rotated.iter().map(|rt| {
                let left = rt * &dt;
                let right = rt * &dm;
                left.trace_product(&right).re
            })) / T::of(m);
            (lw + x).exp() * avg
        })
        .collect();
    Ok(compensated_sum(terms) / beta)
}

/// Entanglement fidelity from the Kraus form ∫d²ν P(ν)|tr[ρD(ν)]|².
pub fn entanglement_fidelity_direct<T: Real>(rho: &DensityOp<T>, t: T) -> Result<T> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::invalid("squeezing t must be finite and ≥ 0"));
    }
    if t == T::zero() {
        return Ok(T::one());
    }
    let c = T::lit(2.0) / t;
    Ok(c * radial_mode_integral(&Repr::of(rho), c)?)
}

/// Pure state of the system and a reference of equal dimension, stored as the
/// coefficient matrix M with |Ψ⟩ = Σ M_{ij}|i⟩|j⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState<T> {
    coeffs: CMatrix<T>,
}

impl<T: Real> JointState<T> {
    pub fn coeffs(&self) -> &CMatrix<T> {
        &self.coeffs
    }

    pub fn norm_sqr(&self) -> T {
        compensated_sum(self.coeffs.as_slice().iter().map(|c| c.norm_sqr()))
    }

    /// Trace over the reference: M M†.
    pub fn reduced(&self) -> CMatrix<T> {
        &self.coeffs * &self.coeffs.adjoint()
    }

    /// ⟨Ψ|D(ν) ⊗ 1|Ψ⟩ from the joint coefficients.
    pub fn displaced_overlap(&self, nu: ComplexAmplitude<T>) -> C<T> {
        let n = self.coeffs.rows();
        let d = displacement_matrix(nu, n, n);
        let dm = &d * &self.coeffs;
        self.coeffs.trace_product(&dm.adjoint()).conj()
    }

    /// Entanglement fidelity of teleporting the system half:
    /// ∫d²ν P(ν)|⟨Ψ|D(ν) ⊗ 1|Ψ⟩|² with radial Gauss–Laguerre and 4N − 2 angles.
    pub fn entanglement_fidelity(&self, t: T) -> Result<T> {
        if t == T::zero() {
            return Ok(T::one());
        }
        let n = self.coeffs.rows();
        let m = 4 * n - 2;
        let c = T::lit(2.0) / t;
        let beta = T::one() + c;
        let rule = GaussRule::<T>::laguerre(64.max(n + 16))?;
        let terms: Vec<T> = rule
            .nodes
            .par_iter()
            .zip(rule.log_weights.par_iter())
            .map(|(&y, &lw)| {
                let x = y / beta;
                if lw + x < T::lit(-700.0) {
                    return T::zero();
                }
                let avg = compensated_sum((0..m).map(|l| {
                    let th = T::TAU() * T::of(l) / T::of(m);
                    self.displaced_overlap(ComplexAmplitude::from_polar(x.sqrt(), th)).norm_sqr()
                })) / T::of(m);
                (lw + x).exp() * avg
            })
            .collect();
        Ok(c * compensated_sum(terms) / beta)
    }
}

fn purify_guard(n: usize) -> Result<()> {
    if n > MAX_PURIFY_DIM {
        return Err(Error::Dimension { dim: n, max: MAX_PURIFY_DIM, what: "purification" });
    }
    Ok(())
}

/// Σ_n √ρ|n⟩ ⊗ |n⟩, i.e. M = √ρ.
pub fn purify<T: Real>(rho: &DensityOp<T>) -> Result<JointState<T>> {
    purify_guard(rho.dim())?;
    let s = rho.matrix().sqrt_psd(T::lit(1e-10))?;
    Ok(JointState { coeffs: s })
}

/// Schmidt form Σ_k √λ_k |e_k⟩ ⊗ |k⟩ from the eigen-decomposition of ρ.
pub fn purify_schmidt<T: Real>(rho: &DensityOp<T>) -> Result<JointState<T>> {
    purify_guard(rho.dim())?;
    let (vals, v) = rho.matrix().hermitian_eigen()?;
    let n = rho.dim();
    Ok(JointState { coeffs: CMatrix::from_fn(n, n, |i, k| v[(i, k)] * vals[k].max(T::zero()).sqrt()) })
}

/// Mixed state from tracing out half of a random pure state on C^N ⊗ C^N.
pub fn random_mixed<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DensityOp<T>> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let m = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(T::lit(re), T::lit(im))
    });
    let rho = &m * &m.adjoint();
    let tr = rho.trace().re;
    let mut rho = rho.scale(T::one() / tr);
    for i in 0..dim {
        let v = rho[(i, i)].re;
        rho[(i, i)] = C::new(v, T::zero());
        for j in 0..i {
            let v = (rho[(i, j)] + rho[(j, i)].conj()) / T::lit(2.0);
            rho[(i, j)] = v;
            rho[(j, i)] = v.conj();
        }
    }
    DensityOp::from_matrix(rho)
}

/// Scale measures from the quadrature variances: ℓ_c = ((Δx)² + (Δp)²)^{−1/2}.
pub fn mixed_scale_report<T: Real, S: QuantumState<T> + ?Sized>(rho: &S) -> ScaleReport<T> {
    let v = quad_moments(rho).var_sum();
    ScaleReport::from_slope_and_var(-v / T::lit(2.0), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::{fidelity_quadrature, number_fidelity, FidelityForm, SqueezeParam};
    use crate::fock::*;
    use crate::phasespace::{char_fn, wigner};
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    fn amp(a: f64, b: f64) -> ComplexAmplitude<f64> {
        ComplexAmplitude::new(a, b)
    }

    fn thermal(nbar: f64, dim: usize) -> DensityOp<f64> {
        make_thermal(ThermalParams::from_nbar(nbar).unwrap(), dim).unwrap()
    }

    #[test]
    fn bold_phi_pure_and_origin() {
        let s = make_compass(1.2f64, 32).unwrap();
        let rho = s.density();
        let (mu, a) = (amp(0.3, -0.4), amp(-0.5, 0.2));
        let v = bold_phi(&rho, mu, a).value;
        let f = char_fn(&s, mu).conj() * char_fn(&s, a);
        assert!((v - f).norm() < 1e-12);
        let th = thermal(0.7, 64);
        assert_relative_eq!(bold_phi(&th, amp(0.0, 0.0), amp(0.0, 0.0)).value.re, th.purity(), epsilon = 1e-12);
    }

    #[test]
    fn bold_phi_thermal_diagonal() {
        let nbar = 1.0;
        let th = thermal(nbar, 96);
        for &mu in &[amp(0.5, 0.2), amp(-1.0, 1.1)] {
            let v = bold_phi(&th, mu, mu).value;
            let k = 2.0 * nbar + 1.0;
            assert!((v.re - (-mu.norm_sqr() / k).exp() / k).abs() < 1e-10 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn bold_w_pure_factorises() {
        let s = make_number::<f64>(2, 8).unwrap();
        let rho = s.density();
        let (b, n) = (amp(0.2, 0.1), amp(-0.4, 0.7));
        assert!((bold_w(&rho, b, n) - wigner(&s, b) * wigner(&s, n)).abs() < 1e-10);
        let vac = make_number::<f64>(0, 4).unwrap().density();
        assert_relative_eq!(bold_w(&vac, amp(0.0, 0.0), amp(0.0, 0.0)), (2.0 / std::f64::consts::PI).powi(2), epsilon = 1e-14);
    }

    #[test]
    fn thermal_entanglement_fidelity() {
        for &nbar in &[0.0, 0.5, 2.0] {
            let th = thermal(nbar, 80);
            for &t in &[0.5, 1.0, 2.0] {
                let closed = 1.0 / (1.0 + (2.0 * nbar + 1.0) * t / 2.0);
                let a = entanglement_fidelity(&th, t).unwrap();
                let b = entanglement_fidelity_direct(&th, t).unwrap();
                assert!((a - closed).abs() < 1e-9 && (b - closed).abs() < 1e-9, "n̄={nbar} t={t}: {a} {b} {closed}");
            }
        }
    }

    #[test]
    fn pure_reduction_and_number_state() {
        let s = make_number::<f64>(2, 8).unwrap();
        let f = entanglement_fidelity(&s.density(), 0.9).unwrap();
        assert!((f - number_fidelity(2, 0.9)).abs() < 1e-10);
        let c = make_compass(1.5f64, 40).unwrap();
        let q = fidelity_quadrature(&c, SqueezeParam::from_t(1.3).unwrap(), FidelityForm::Four).unwrap();
        assert!((entanglement_fidelity(&c.density(), 1.3).unwrap() - q).abs() < 1e-10);
    }

    #[test]
    fn random_mixed_two_routes() {
        let mut rng = seeded(3);
        let rho = random_mixed::<f64, _>(16, &mut rng).unwrap();
        let a = entanglement_fidelity(&rho, 0.8).unwrap();
        let b = entanglement_fidelity_direct(&rho, 0.8).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn purifications_agree_and_roundtrip() {
        let rho = make_thermal_tol(ThermalParams::from_nbar(0.5f64).unwrap(), 16, 1.0).unwrap();
        let p1 = purify(&rho).unwrap();
        let p2 = purify_schmidt(&rho).unwrap();
        assert!(p1.reduced().max_abs_diff(rho.matrix()) < 1e-10);
        assert!(p2.reduced().max_abs_diff(rho.matrix()) < 1e-10);
        assert_relative_eq!(p1.norm_sqr(), 1.0, epsilon = 1e-12);
        let f1 = p1.entanglement_fidelity(1.0).unwrap();
        let f2 = p2.entanglement_fidelity(1.0).unwrap();
        assert!((f1 - f2).abs() < 1e-8);
        assert!((f1 - entanglement_fidelity_direct(&rho, 1.0).unwrap()).abs() < 1e-8);
        let pure = make_number::<f64>(1, 4).unwrap().density();
        let j = purify(&pure).unwrap();
        // product state: M has rank one
        let (vals, _) = j.reduced().hermitian_eigen().unwrap();
        assert!(vals[..3].iter().all(|v| v.abs() < 1e-10));
        assert!(matches!(purify(&thermal(0.1, 40)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mixed_scales() {
        let r = mixed_scale_report(&thermal(1.5, 96));
        assert_relative_eq!(r.ell_c, 1.0 / 4.0f64.sqrt(), epsilon = 1e-9);
        let v = mixed_scale_report(&thermal(0.0, 4));
        assert_relative_eq!(v.ell_c, 1.0, epsilon = 1e-12);
        // slope against a finite difference of the entanglement fidelity
        let th = thermal(0.5, 80);
        let h = 1e-3;
        let fd = (entanglement_fidelity(&th, h).unwrap() - 1.0) / h;
        assert!(((fd - mixed_scale_report(&th).slope0) / fd).abs() < 1e-3);
    }

    #[test]
    fn bold_w_fourier_pairs_with_bold_phi() {
        // 𝚽(μ,α) = ∫d²βd²ν 𝐖(β,ν) e^{−(μβ*−μ*β)} e^{αν*−α*ν} on a trapezoid grid
        let rho = random_mixed::<f64, _>(8, &mut seeded(9)).unwrap();
        let (half, n) = (7.0, 41usize);
        let h = 2.0 * half / (n - 1) as f64;
        let pts: Vec<ComplexAmplitude<f64>> =
            (0..n * n).map(|k| amp(-half + h * (k / n) as f64, -half + h * (k % n) as f64)).collect();
        let a_mats: Vec<CMatrix<f64>> = pts.iter().map(|&b| rho.matrix() * &parity_displacement(b, 8)).collect();
        let cell = h * h / 2.0;
        let pi2 = std::f64::consts::PI.powi(2);
        for &(mu, al) in &[(amp(0.4, -0.3), amp(-0.2, 0.5)), (amp(1.0, 0.0), amp(0.0, 0.8))] {
            let phase = |m: ComplexAmplitude<f64>, b: ComplexAmplitude<f64>| {
                let z = m.to_complex() * b.to_complex().conj() - m.to_complex().conj() * b.to_complex();
                z.exp()
            };
            let em: Vec<C<f64>> = pts.iter().map(|&b| phase(-mu, b)).collect();
            let ea: Vec<C<f64>> = pts.iter().map(|&b| phase(al, b)).collect();
            let mut acc = C::new(0.0, 0.0);
            for (i, ai) in a_mats.iter().enumerate() {
                let mut row = C::new(0.0, 0.0);
                for (j, aj) in a_mats.iter().enumerate() {
                    row += ea[j] * ai.trace_product(aj).re;
                }
                acc += em[i] * row;
            }
            let grid = acc * cell * cell / pi2;
            let exact = bold_phi(&rho, mu, al).value;
            assert!((grid - exact).norm() < 1e-3, "{grid} vs {exact}");
        }
    }
}
