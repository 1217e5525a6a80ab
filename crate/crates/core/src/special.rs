//! Special functions and compensated summation.

use crate::scalar::Real;
use std::sync::OnceLock;

const LN_FACT_TABLE: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = crate::special::Neumaier::<f64>::default();
        t.push(0.0);
        for k in 1..LN_FACT_TABLE {
            acc.add((k as f64).ln());
            t.push(acc.sum());
        }
        t
    })
}

/// ln n!
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < LN_FACT_TABLE {
        return T::lit(ln_fact_table()[n]);
    }
    // Stirling series, ample beyond the table.
    let x = n as f64 + 1.0;
    let v = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5));
    T::lit(v)
}

/// ln C(n, k)
pub fn ln_binomial<T: Real>(n: usize, k: usize) -> T {
    debug_assert!(k <= n);
    ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k)
}

/// Neumaier (improved Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Neumaier<T> {
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Real> FromIterator<T> for Neumaier<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Neumaier { sum: T::zero(), comp: T::zero() };
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    it.into_iter().collect::<Neumaier<T>>().sum()
}

/// Value of a quantity stored as `mantissa · e^{log_scale}`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<T> {
    pub mantissa: T,
    pub log_scale: T,
}

impl<T: Real> Scaled<T> {
    pub fn value(self) -> T {
        self.mantissa * self.log_scale.exp()
    }
}

/// Generalized Laguerre polynomial L_n^{(alpha)}(x) by upward recurrence in the degree,
/// rescaling whenever the running values grow large so that nothing overflows.
pub fn laguerre_scaled<T: Real>(n: usize, alpha: T, x: T) -> Scaled<T> {
    let big = T::lit(1e150);
    let mut log_scale = T::zero();
    let mut prev = T::one();
    if n == 0 {
        return Scaled { mantissa: prev, log_scale };
    }
    let mut cur = T::one() + alpha - x;
    for k in 1..n {
        let kf = T::of(k);
        let next = ((T::lit(2.0) * kf + T::one() + alpha - x) * cur - (kf + alpha) * prev) / (kf + T::one());
        prev = cur;
        cur = next;
        if cur.abs() > big {
            prev /= big;
            cur /= big;
            log_scale += big.ln();
        }
    }
    Scaled { mantissa: cur, log_scale }
}

/// Generalized Laguerre polynomial L_n^{(alpha)}(x).
pub fn laguerre<T: Real>(n: usize, alpha: T, x: T) -> T {
    laguerre_scaled(n, alpha, x).value()
}

/// Legendre polynomial P_n(x) by Bonnet's recurrence.
pub fn legendre<T: Real>(n: usize, x: T) -> T {
    let mut prev = T::one();
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let kf = T::of(k);
        let next = ((T::lit(2.0) * kf + T::one()) * x * cur - kf * prev) / (kf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
