//! Small dense complex matrices and a Hermitian eigensolver.

use crate::error::{Error, Result};
use crate::scalar::{cz, Real, C};
use std::ops::{Index, IndexMut, Mul};

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![cz(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { C::new(T::one(), T::zero()) } else { cz() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).fold(cz(), |acc, i| acc + self[(i, i)])
    }

    /// tr(A B) without forming the product.
    pub fn trace_product(&self, other: &Self) -> C<T> {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = cz();
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn scale(&self, s: T) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).iter().zip(v).fold(cz(), |acc, (a, b)| acc + a * b)).collect()
    }

    /// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
    /// orthonormal eigenvectors stored as the columns of the returned matrix.
    pub fn hermitian_eigen(&self) -> Result<(Vec<T>, CMatrix<T>)> {
        if self.rows != self.cols {
            return Err(Error::invalid("eigen-decomposition needs a square matrix"));
        }
        let n = self.rows;
        // Real symmetric embedding [[A, -B], [B, A]] of H = A + iB.
        let m = 2 * n;
        let mut s = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let z = self[(i, j)];
                s[i * m + j] = z.re;
                s[(i + n) * m + (j + n)] = z.re;
                s[i * m + (j + n)] = -z.im;
                s[(i + n) * m + j] = z.im;
            }
        }
        let (vals, vecs) = jacobi_symmetric(&mut s, m)?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("finite eigenvalues"));

        let mut out_vals = Vec::with_capacity(n);
        let mut out_vecs: Vec<Vec<C<T>>> = Vec::with_capacity(n);
        for &k in &order {
            if out_vecs.len() == n {
                break;
            }
            let mut z: Vec<C<T>> = (0..n).map(|i| C::new(vecs[i * m + k], vecs[(i + n) * m + k])).collect();
            for q in &out_vecs {
                let proj = q.iter().zip(&z).fold(cz(), |acc, (a, b)| acc + a.conj() * b);
                for (zi, qi) in z.iter_mut().zip(q) {
                    *zi -= qi * proj;
                }
            }
            let norm = z.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
            if norm > T::lit(0.5) {
                for zi in z.iter_mut() {
                    *zi /= norm;
                }
                out_vals.push(vals[k]);
                out_vecs.push(z);
            }
        }
        if out_vecs.len() != n {
            return Err(Error::Quadrature { what: "Hermitian eigenvector extraction", change: 0.0 });
        }
        let v = CMatrix::from_fn(n, n, |i, j| out_vecs[j][i]);
        Ok((out_vals, v))
    }

    /// Square root of a positive semidefinite Hermitian matrix. Eigenvalues in
    /// `[-clamp, 0)` are set to zero; anything more negative is rejected.
    pub fn sqrt_psd(&self, clamp: T) -> Result<Self> {
        let (vals, v) = self.hermitian_eigen()?;
        let n = self.rows;
        let mut roots = Vec::with_capacity(n);
        for &l in &vals {
            if l < -clamp {
                return Err(Error::invalid(format!("matrix has negative eigenvalue {}", l.f64())));
            }
            roots.push(l.max(T::zero()).sqrt());
        }
        Ok(CMatrix::from_fn(n, n, |i, j| {
            (0..n).fold(cz(), |acc, k| acc + v[(i, k)] * v[(j, k)].conj() * roots[k])
        }))
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.cols, rhs.rows, "matrix shapes do not chain");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// Cyclic Jacobi eigensolver for a dense real symmetric matrix (row-major, destroyed).
/// Returns eigenvalues and eigenvectors (column k of the row-major `m×m` buffer).
pub fn jacobi_symmetric<T: Real>(a: &mut [T], m: usize) -> Result<(Vec<T>, Vec<T>)> {
    let mut v = vec![T::zero(); m * m];
    for i in 0..m {
        v[i * m + i] = T::one();
    }
    let scale = a.iter().map(|x| x.abs()).fold(T::zero(), T::max).max(T::min_positive_value());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..m {
            for j in i + 1..m {
                off += a[i * m + j] * a[i * m + j];
            }
        }
        if off.sqrt() <= T::epsilon() * scale {
            let vals = (0..m).map(|i| a[i * m + i]).collect();
            return Ok((vals, v));
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                // drop elements already below rounding of both diagonal entries
                let g = T::lit(100.0) * apq.abs();
                if apq.abs() <= T::min_positive_value() || (app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs()) {
                    a[p * m + q] = T::zero();
                    a[q * m + p] = T::zero();
                    continue;
                }
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Quadrature { what: "Jacobi eigen-iteration", change: f64::NAN })
}
