use alloc::vec;
use alloc::vec::Vec;

use super::{sqrt, CsrMatrix};
use crate::{Error, Result};

/// Cholesky factorization of a symmetric positive definite banded matrix.
///
/// The finite-difference Schur operator has half-bandwidth `nx`, so a band
/// factorization costs `O(n nx²)` and is the sparse direct solver used for
/// shift-invert and for exact full-order reference solves.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    // row i holds L[i, i-bw..=i] in slots 0..=bw
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factors `a + diag(shift)`, reading only the lower triangle of `a`.
    pub fn factor(a: &CsrMatrix, shift: Option<&[f64]>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        if let Some(s) = shift {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.len(),
                });
            }
        }
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for (i, j, v) in a.triplets() {
            if j <= i {
                band[i * w + (j + bw - i)] += v;
            }
        }
        if let Some(s) = shift {
            for i in 0..n {
                band[i * w + bw] += s[i];
            }
        }
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut d = band[j * w + bw];
            for k in k0..j {
                let l = band[j * w + (k + bw - j)];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = sqrt(d);
            band[j * w + bw] = d;
            for i in j + 1..(j + bw + 1).min(n) {
                let mut s = band[i * w + (j + bw - i)];
                let k_lo = i.saturating_sub(bw).max(k0);
                for k in k_lo..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                band[i * w + (j + bw - i)] = s / d;
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.band[i * (self.bw + 1) + (j + self.bw - i)]
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l(i, k) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l(k, i) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
