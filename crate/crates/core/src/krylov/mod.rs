//! Symmetric Krylov kernels: MINRES, MINRES deflated by a recycle space, and
//! a shift-invert Lanczos eigensolver for the smallest eigenpairs.

mod eigen;
mod minres;

pub use eigen::{smallest_eigenpairs, EigenPairs, EigenSettings};
pub use minres::{minres, recycled_minres, RecycledSolution};

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, norm2, scale, BandedCholesky, CsrMatrix, Mat};
use crate::{Error, Result};

/// A square linear operator `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }
}

impl LinearOperator for Mat {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            axpy(xj, self.col(j), y);
        }
    }
}

/// Applies the inverse of a factored matrix.
impl LinearOperator for BandedCholesky {
    fn dim(&self) -> usize {
        BandedCholesky::dim(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.solve_in_place(y);
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative residual target.
    pub tol: f64,
    /// Iteration cap; `None` means `2n`.
    pub max_iter: Option<usize>,
    /// Give up when the residual has not decreased over this many steps.
    pub stagnation_window: usize,
}

impl SolverSettings {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_iter: None,
            stagnation_window: 50,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    pub(crate) fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(2 * n)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Recurrence residual estimate relative to the reference norm, one entry
    /// per step starting with the initial residual.
    pub rel_residual_history: Vec<f64>,
    pub converged: bool,
    /// Explicitly recomputed final relative residual.
    pub final_rel_residual: f64,
    /// Norm of the computed solution (or correction).
    pub correction_norm: f64,
}

/// A pair `(U, K)` with `A U = K` and `Kᵀ K = I`.
#[derive(Debug, Clone)]
pub struct RecycleSpace {
    u: Mat,
    k: Mat,
}

/// Columns whose projected image norm falls below this fraction of the
/// original image norm are treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-12;

impl RecycleSpace {
    pub fn new(n: usize) -> Self {
        Self {
            u: Mat::with_rows(n),
            k: Mat::with_rows(n),
        }
    }

    /// Takes `(U, K)` as given; the caller guarantees the invariants.
    pub fn from_parts(u: Mat, k: Mat) -> Result<Self> {
        if u.nrows() != k.nrows() || u.ncols() != k.ncols() {
            return Err(Error::DimensionMismatch {
                expected: u.ncols(),
                got: k.ncols(),
            });
        }
        Ok(Self { u, k })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn u(&self) -> &Mat {
        &self.u
    }

    pub fn k(&self) -> &Mat {
        &self.k
    }

    /// Appends `col` given its image `A col`. Returns `false` (and leaves the
    /// space untouched) if the image is numerically in `Range(K)`.
    pub fn append_with_image(&mut self, col: &[f64], image: &[f64]) -> Result<bool> {
        if col.len() != self.dim() || image.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: col.len(),
            });
        }
        let mut w = image.to_vec();
        let norm0 = norm2(&w);
        if norm0 == 0.0 {
            return Ok(false);
        }
        let c = crate::linalg::orthogonalize(&self.k, self.k.ncols(), &mut w);
        let rho = norm2(&w);
        if rho <= RANK_TOL * norm0 {
            return Ok(false);
        }
        // u_new = (col - U c) / rho so that A u_new = (image - K c) / rho
        let mut u = col.to_vec();
        for (j, cj) in c.iter().enumerate() {
            axpy(-cj, self.u.col(j), &mut u);
        }
        scale(1.0 / rho, &mut u);
        scale(1.0 / rho, &mut w);
        self.u.push_col(&u)?;
        self.k.push_col(&w)?;
        Ok(true)
    }

    pub fn append(&mut self, op: &dyn LinearOperator, col: &[f64]) -> Result<bool> {
        let image = op.apply_vec(col);
        self.append_with_image(col, &image)
    }

    /// `Kᵀ b`
    pub fn coefficients(&self, b: &[f64]) -> Vec<f64> {
        self.k.tr_mul_vec(b)
    }

    /// Removes the `Range(K)` component of `v` (two passes).
    pub fn project_out(&self, v: &mut [f64]) {
        crate::linalg::orthogonalize(&self.k, self.k.ncols(), v);
    }

    /// Residual-minimizing guess over `Range(U)`: `z = U Kᵀ b`, `r = b − K Kᵀ b`.
    pub fn initial_guess(&self, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.coefficients(b);
        let z = self.u.mul_vec(&c);
        let mut r = b.to_vec();
        for (j, cj) in c.iter().enumerate() {
            axpy(-cj, self.k.col(j), &mut r);
        }
        (z, r)
    }

    /// `max |KᵀK − I|`
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.k.tr_mul(&self.k);
        g.sub(&Mat::identity(self.len())).max_abs()
    }

    /// `max |A U − K|`
    pub fn image_error(&self, op: &dyn LinearOperator) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.len() {
            let au = op.apply_vec(self.u.col(j));
            for (a, k) in au.iter().zip(self.k.col(j)) {
                worst = worst.max((a - k).abs());
            }
        }
        worst
    }
}

pub(crate) fn residual_norm(op: &dyn LinearOperator, b: &[f64], x: &[f64]) -> f64 {
    let mut r = op.apply_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(&r)
}

pub(crate) fn is_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
