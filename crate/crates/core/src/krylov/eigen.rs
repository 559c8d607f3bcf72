use alloc::vec;
use alloc::vec::Vec;

use super::LinearOperator;
use crate::linalg::{axpy, dot, norm2, orthogonalize, scale, symmetric_eigen, Mat, SplitMix64};
use crate::{Error, Result};

/// Settings for [`smallest_eigenpairs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSettings {
    /// Residual target relative to an estimate of `λ_max(A)`.
    pub tol: f64,
    /// Cap on the Lanczos basis size; `None` means `n`.
    pub max_basis: Option<usize>,
    pub seed: u64,
}

impl EigenSettings {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_basis: None,
            seed: 0x5eed,
        }
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Mat,
    /// `‖A u − λ u‖` per pair.
    pub residuals: Vec<f64>,
    pub lanczos_steps: usize,
}

/// The `k` smallest eigenpairs of an SPD operator `A` by Lanczos with full
/// reorthogonalization on `A⁻¹` (shift-invert at zero).
///
/// `inverse` must apply `A⁻¹`. Convergence is declared when every wanted pair
/// has `‖A u − λ u‖ ≤ tol · λ_max`, with `λ_max` estimated by a short Lanczos
/// run on `A`.
///
/// A single start vector sees one copy of each eigenvalue; repeated
/// eigenvalues are found only when rounding or a restart injects the missing
/// direction.
pub fn smallest_eigenpairs(
    op: &dyn LinearOperator,
    inverse: &dyn LinearOperator,
    k: usize,
    settings: &EigenSettings,
) -> Result<EigenPairs> {
    let n = op.dim();
    if inverse.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: inverse.dim(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(alloc::format!("k = {k} for n = {n}")));
    }
    let max_basis = settings.max_basis.unwrap_or(n).clamp(k, n);
    let mut rng = SplitMix64::new(settings.seed);
    let lmax = largest_eigenvalue_estimate(op, 30.min(n), &mut rng);
    let threshold = settings.tol * lmax;

    let mut q = Mat::with_rows(n);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new(); // beta[j] couples q_j and q_{j+1}
    let mut v = random_unit(n, &q, &mut rng)?;
    let mut w = vec![0.0; n];
    let mut next_check = (2 * k).max(10).min(max_basis);

    loop {
        q.push_col(&v)?;
        let m = q.ncols();
        inverse.apply(&v, &mut w);
        let a = dot(&v, &w);
        alpha.push(a);
        orthogonalize(&q, m, &mut w);
        let b = norm2(&w);

        if m >= next_check || m == max_basis || m == n {
            let t = tridiagonal(&alpha, &beta);
            let (theta, s) = symmetric_eigen(&t);
            // largest θ of A⁻¹ are smallest λ of A
            let mut values = Vec::with_capacity(k);
            let mut vectors = Mat::with_rows(n);
            let mut residuals = Vec::with_capacity(k);
            let mut ok = true;
            for idx in (m - k..m).rev() {
                if theta[idx] <= 0.0 {
                    return Err(Error::NotPositiveDefinite {
                        pivot: idx,
                        value: theta[idx],
                    });
                }
                let lambda = 1.0 / theta[idx];
                let u = q.mul_vec(s.col(idx));
                let mut r = op.apply_vec(&u);
                axpy(-lambda, &u, &mut r);
                let res = norm2(&r);
                ok &= res <= threshold;
                values.push(lambda);
                vectors.push_col(&u)?;
                residuals.push(res);
            }
            if ok || m == max_basis || m == n {
                if !ok {
                    let worst = residuals.iter().copied().fold(0.0, f64::max);
                    return Err(Error::NotConverged {
                        solver: "lanczos",
                        iterations: m,
                        residual: worst / lmax,
                    });
                }
                return Ok(EigenPairs {
                    values,
                    vectors,
                    residuals,
                    lanczos_steps: m,
                });
            }
            next_check = (m + 5.max(m / 4)).min(max_basis);
        }

        if b <= 1e-12 * a.abs().max(f64::MIN_POSITIVE) {
            // invariant subspace found; continue from a fresh direction
            beta.push(0.0);
            v = random_unit(n, &q, &mut rng)?;
        } else {
            beta.push(b);
            scale(1.0 / b, &mut w);
            v.copy_from_slice(&w);
        }
    }
}

/// Largest Ritz value after `steps` Lanczos iterations on `A`.
pub(crate) fn largest_eigenvalue_estimate(op: &dyn LinearOperator, steps: usize, rng: &mut SplitMix64) -> f64 {
    let n = op.dim();
    let mut q = Mat::with_rows(n);
    let Ok(mut v) = random_unit(n, &q, rng) else {
        return 0.0;
    };
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![0.0; n];
    for _ in 0..steps.max(1) {
        if q.push_col(&v).is_err() {
            break;
        }
        op.apply(&v, &mut w);
        alpha.push(dot(&v, &w));
        orthogonalize(&q, q.ncols(), &mut w);
        let b = norm2(&w);
        if b <= 1e-12 * alpha.last().unwrap().abs() || q.ncols() == n {
            break;
        }
        beta.push(b);
        scale(1.0 / b, &mut w);
        v.copy_from_slice(&w);
    }
    beta.truncate(alpha.len().saturating_sub(1));
    let (theta, _) = symmetric_eigen(&tridiagonal(&alpha, &beta));
    theta.last().copied().unwrap_or(0.0)
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> Mat {
    let m = alpha.len();
    let mut t = Mat::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

fn random_unit(n: usize, q: &Mat, rng: &mut SplitMix64) -> Result<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.next_signed()).collect();
        let n0 = norm2(&v);
        orthogonalize(q, q.ncols(), &mut v);
        let nv = norm2(&v);
        if nv > 1e-8 * n0 {
            scale(1.0 / nv, &mut v);
            return Ok(v);
        }
    }
    Err(Error::Breakdown("lanczos restart"))
}
