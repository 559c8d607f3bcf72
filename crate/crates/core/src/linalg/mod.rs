//! Small dense and sparse kernels used throughout the crate.
//!
//! Dense matrices are column-major; the column is the natural unit for
//! everything here (basis vectors, right-hand sides, solutions).

mod banded;
mod sparse;

pub use banded::BandedCholesky;
pub use sparse::CsrMatrix;

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    // scaled accumulation would be safer for extreme magnitudes; our vectors
    // stay well inside the f64 range
    sqrt(dot(x, x))
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// y += a * x
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: f64, x: &mut [f64]) {
    for xi in x {
        *xi *= a;
    }
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Empty matrix with `nrows` rows, ready for [`Mat::push_col`].
    pub fn with_rows(nrows: usize) -> Self {
        Self::zeros(nrows, 0)
    }

    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch {
                expected: nrows * ncols,
                got: data.len(),
            });
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                m.data[j * nrows + i] = f(i, j);
            }
        }
        m
    }

    pub fn from_cols(nrows: usize, cols: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::with_rows(nrows);
        for c in cols {
            m.push_col(c)?;
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn cols(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.ncols).map(move |j| self.col(j))
    }

    pub fn push_col(&mut self, col: &[f64]) -> Result<()> {
        if col.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: col.len(),
            });
        }
        self.data.extend_from_slice(col);
        self.ncols += 1;
        Ok(())
    }

    /// Drops trailing columns so that `ncols` columns remain.
    pub fn truncate_cols(&mut self, ncols: usize) {
        if ncols < self.ncols {
            self.data.truncate(ncols * self.nrows);
            self.ncols = ncols;
        }
    }

    pub fn remove_col(&mut self, j: usize) {
        let n = self.nrows;
        self.data.drain(j * n..(j + 1) * n);
        self.ncols -= 1;
    }

    /// Columns `start..end` as a new matrix.
    pub fn col_range(&self, start: usize, end: usize) -> Mat {
        Mat {
            nrows: self.nrows,
            ncols: end - start,
            data: self.data[start * self.nrows..end * self.nrows].to_vec(),
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Mat {
        let mut m = Mat::with_rows(self.nrows);
        for &j in idx {
            m.data.extend_from_slice(self.col(j));
            m.ncols += 1;
        }
        m
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    /// `self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.col(j), &mut y);
            }
        }
        y
    }

    /// `selfᵀ * x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        self.cols().map(|c| dot(c, x)).collect()
    }

    /// `self * other`
    pub fn mul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.ncols, other.nrows);
        let mut out = Mat::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let y = self.mul_vec(other.col(j));
            out.col_mut(j).copy_from_slice(&y);
        }
        out
    }

    /// `selfᵀ * other`
    pub fn tr_mul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.nrows, other.nrows);
        Mat::from_fn(self.ncols, other.ncols, |i, j| dot(self.col(i), other.col(j)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        debug_assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Mat {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `vec(self)`, the columns stacked left to right.
    pub fn vec(&self) -> Vec<f64> {
        self.data.clone()
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.nrows + i]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.nrows + i]
    }
}

/// Dense Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    pub fn factor(a: &Mat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = sqrt(d);
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let mut x = b.clone();
        for j in 0..x.ncols() {
            self.solve_in_place(x.col_mut(j));
        }
        x
    }
}

/// Solves `R x = b` for upper-triangular `R` (only the upper triangle is read).
pub fn solve_upper(r: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= r[(i, k)] * x[k];
        }
        let d = r[(i, i)];
        if d == 0.0 {
            return Err(Error::Singular);
        }
        x[i] = s / d;
    }
    Ok(x)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn symmetric_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    (values, v.select_cols(&order))
}

/// Orthogonalizes `v` against the first `ncols` columns of the orthonormal
/// matrix `q` with two passes of classical Gram-Schmidt.
///
/// Returns the accumulated coefficients `qᵀv` of the original vector.
pub fn orthogonalize(q: &Mat, ncols: usize, v: &mut [f64]) -> Vec<f64> {
    let mut coeffs = vec![0.0; ncols];
    for _pass in 0..2 {
        for j in 0..ncols {
            let c = dot(q.col(j), v);
            axpy(-c, q.col(j), v);
            coeffs[j] += c;
        }
    }
    coeffs
}

/// Thin QR by repeated classical Gram-Schmidt; returns `(Q, R)` with a
/// positive diagonal in `R`. Fails if a column is numerically dependent.
pub fn qr_thin(a: &Mat) -> Result<(Mat, Mat)> {
    let n = a.ncols();
    let mut q = Mat::with_rows(a.nrows());
    let mut r = Mat::zeros(n, n);
    for j in 0..n {
        let mut w = a.col(j).to_vec();
        let norm0 = norm2(&w);
        let c = orthogonalize(&q, j, &mut w);
        let rho = norm2(&w);
        if rho <= 1e-14 * norm0 || rho == 0.0 {
            return Err(Error::Singular);
        }
        scale(1.0 / rho, &mut w);
        for (i, ci) in c.into_iter().enumerate() {
            r[(i, j)] = ci;
        }
        r[(j, j)] = rho;
        q.push_col(&w)?;
    }
    Ok((q, r))
}

/// SplitMix64: a tiny deterministic generator for start vectors.
#[derive(Debug, Clone)]
pub(crate) struct SplitMix64(u64);

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub(crate) fn next_signed(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Mat {
        let mut g = SplitMix64::new(7);
        let b = Mat::from_fn(n, n, |_, _| g.next_signed());
        let mut a = b.tr_mul(&b);
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        a
    }

    #[test]
    fn cholesky_solves() {
        let a = spd(12);
        let x: Vec<f64> = (0..12).map(|i| i as f64 - 3.0).collect();
        let b = a.mul_vec(&x);
        let got = Cholesky::factor(&a).unwrap().solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Mat::identity(3);
        a[(1, 1)] = -1.0;
        assert!(matches!(
            Cholesky::factor(&a),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = spd(9);
        let (vals, vecs) = symmetric_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for (k, lam) in vals.iter().enumerate() {
            let av = a.mul_vec(vecs.col(k));
            for i in 0..9 {
                assert!((av[i] - lam * vecs[(i, k)]).abs() < 1e-10);
            }
        }
        let qtq = vecs.tr_mul(&vecs);
        assert!(qtq.sub(&Mat::identity(9)).max_abs() < 1e-12);
    }

    #[test]
    fn qr_thin_factors() {
        let mut g = SplitMix64::new(3);
        let a = Mat::from_fn(20, 6, |_, _| g.next_signed());
        let (q, r) = qr_thin(&a).unwrap();
        assert!(q.mul(&r).sub(&a).max_abs() < 1e-13);
        assert!(q.tr_mul(&q).sub(&Mat::identity(6)).max_abs() < 1e-14);
        let b: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let x = solve_upper(&r, &r.mul_vec(&b)).unwrap();
        assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
