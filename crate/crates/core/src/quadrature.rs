//! Gauss rules from the Golub–Welsch construction, with weights kept in the log domain.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nodes and log-weights of a Gauss rule.
#[derive(Debug, Clone)]
pub struct GaussRule<T> {
    pub nodes: Vec<T>,
    pub log_weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = T> + '_ {
        self.log_weights.iter().map(|w| w.exp())
    }

    /// Gauss–Laguerre rule for ∫₀^∞ e^{-x} f(x) dx.
    ///
    /// Standard rules are always built in f64 and then converted.
    pub fn laguerre(k: usize) -> Result<Self> {
        let diag: Vec<f64> = (0..k).map(|i| (2 * i + 1) as f64).collect();
        let off: Vec<f64> = (0..k).map(|i| i as f64).collect();
        golub_welsch(&diag, &off, 0.0).map(|r| r.cast())
    }

    /// Gauss–Hermite rule for ∫ e^{-x²} f(x) dx.
    pub fn hermite(k: usize) -> Result<Self> {
        let diag = vec![0.0f64; k];
        let off: Vec<f64> = (0..k).map(|i| (i as f64 / 2.0).sqrt()).collect();
        golub_welsch(&diag, &off, 0.5 * std::f64::consts::PI.ln()).map(|r| r.cast())
    }
}

impl GaussRule<f64> {
    fn cast<T: Real>(self) -> GaussRule<T> {
        GaussRule {
            nodes: self.nodes.into_iter().map(T::lit).collect(),
            log_weights: self.log_weights.into_iter().map(T::lit).collect(),
        }
    }
}

/// Builds a Gauss rule from Jacobi-matrix recurrence coefficients.
///
/// `diag[j]` = a_j and `off[j]` = b_j (coupling between j−1 and j, `off[0]` unused),
/// `log_mu0` = ln ∫ w(x) dx.
pub fn golub_welsch<T: Real>(diag: &[T], off: &[T], log_mu0: T) -> Result<GaussRule<T>> {
    let k = diag.len();
    if k == 0 {
        return Err(Error::invalid("Gauss rule needs at least one node"));
    }
    let mut d = diag.to_vec();
    let mut e: Vec<T> = (0..k).map(|i| if i + 1 < k { off[i + 1] } else { T::zero() }).collect();
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));

    // b_K closes the recurrence for the degree-K polynomial used in the Newton polish.
    let b_k = extend_off(off);
    let mut nodes = Vec::with_capacity(k);
    let mut log_weights = Vec::with_capacity(k);
    for &x0 in &d {
        let mut x = x0;
        for _ in 0..3 {
            let (p, dp) = ortho_poly_and_derivative(diag, off, b_k, x);
            if dp == T::zero() {
                break;
            }
            let step = p / dp;
            x -= step;
            if step.abs() <= T::epsilon() * x.abs().max(T::one()) {
                break;
            }
        }
        nodes.push(x);
        log_weights.push(log_mu0 - log_sum_sq_ortho(diag, off, x));
    }
    Ok(GaussRule { nodes, log_weights })
}

fn extend_off<T: Real>(off: &[T]) -> T {
    // Extrapolate b_K from the last two coefficients; only the ratio p/p' matters.
    let k = off.len();
    match k {
        0 | 1 => T::one(),
        _ => {
            let last = off[k - 1];
            let prev = off[k - 2];
            (last + (last - prev)).max(T::epsilon())
        }
    }
}

/// Degree-K orthonormal polynomial and its derivative at x, up to a common positive scale.
fn ortho_poly_and_derivative<T: Real>(diag: &[T], off: &[T], b_k: T, x: T) -> (T, T) {
    let k = diag.len();
    let big = T::lit(1e100);
    let (mut p_prev, mut p) = (T::zero(), T::one());
    let (mut dp_prev, mut dp) = (T::zero(), T::zero());
    for j in 0..k {
        let b_next = if j + 1 < k { off[j + 1] } else { b_k };
        let b_j = if j > 0 { off[j] } else { T::zero() };
        let p_next = ((x - diag[j]) * p - b_j * p_prev) / b_next;
        let dp_next = ((x - diag[j]) * dp + p - b_j * dp_prev) / b_next;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
        let m = p.abs().max(dp.abs());
        if m > big {
            p /= big;
            p_prev /= big;
            dp /= big;
            dp_prev /= big;
        }
    }
    (p, dp)
}

/// ln Σ_{j<K} p_j(x)² for orthonormal polynomials with p_0 = 1 (normalisation applied by caller).
fn log_sum_sq_ortho<T: Real>(diag: &[T], off: &[T], x: T) -> T {
    let k = diag.len();
    let big = T::lit(1e100);
    let mut log_scale = T::zero();
    let (mut p_prev, mut p) = (T::zero(), T::one());
    let mut acc = T::one();
    for j in 0..k - 1 {
        let b_j = if j > 0 { off[j] } else { T::zero() };
        let p_next = ((x - diag[j]) * p - b_j * p_prev) / off[j + 1];
        p_prev = p;
        p = p_next;
        acc += p * p;
        if p.abs() > big {
            p /= big;
            p_prev /= big;
            acc /= big * big;
            log_scale += T::lit(2.0) * big.ln();
        }
    }
    acc.ln() + log_scale
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson shifts.
///
/// On entry `d` holds the diagonal and `e[i]` the coupling between rows i and i+1.
/// On exit `d` holds the eigenvalues (unsorted).
pub fn tridiagonal_ql<T: Real>(d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Quadrature { what: "tridiagonal QL iteration", change: e[l].f64() });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn laguerre_integrates_monomials_exactly() {
        let rule = GaussRule::<f64>::laguerre(20).unwrap();
        for p in 0..39u32 {
            let s: f64 = rule.nodes.iter().zip(rule.weights()).map(|(x, w)| w * x.powi(p as i32)).sum();
            assert_relative_eq!(s, fact(p), max_relative = 1e-11);
        }
    }

    #[test]
    fn hermite_integrates_even_moments() {
        let rule = GaussRule::<f64>::hermite(16).unwrap();
        for p in 0..16u32 {
            let s: f64 = rule.nodes.iter().zip(rule.weights()).map(|(x, w)| w * x.powi(2 * p as i32)).sum();
            // ∫ x^{2p} e^{-x²} = Γ(p + 1/2)
            let mut g = std::f64::consts::PI.sqrt();
            for j in 0..p {
                g *= j as f64 + 0.5;
            }
            assert_relative_eq!(s, g, max_relative = 1e-11);
        }
    }

    #[test]
    fn large_laguerre_rule_has_finite_log_weights() {
        let rule = GaussRule::<f64>::laguerre(400).unwrap();
        assert!(rule.log_weights.iter().all(|w| w.is_finite()));
        let total: f64 = rule.weights().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-11);
        // first moment
        let m1: f64 = rule.nodes.iter().zip(rule.weights()).map(|(x, w)| w * x).sum();
        assert_relative_eq!(m1, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn f32_rules_work() {
        let rule = GaussRule::<f32>::laguerre(8).unwrap();
        let s: f32 = rule.nodes.iter().zip(rule.weights()).map(|(x, w)| w * x * x).sum();
        assert!((s - 2.0).abs() < 1e-4);
    }
}
