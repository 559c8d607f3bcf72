//! Global reduced basis built on the fly by inner-outer Krylov recycling.
//!
//! `V` holds eigenvectors of the reference operator, the reference solutions
//! and every non-redundant correction direction found while solving later
//! systems. For the current system `Ã_i = Ã_* + diag(μ_i)` the basis keeps a
//! thin QR `Ã_i V = K R` so that the best approximation from `Range(V)` is
//! available before any Krylov iteration starts.

use alloc::vec;
use alloc::vec::Vec;

use crate::krylov::{
    minres, recycled_minres, smallest_eigenpairs, EigenPairs, EigenSettings, LinearOperator, RecycleSpace,
    SolveReport, SolverSettings, RANK_TOL,
};
use crate::linalg::{axpy, dot, norm2, orthogonalize, qr_thin, scale, solve_upper, Mat};
use crate::{Error, Result};

/// Provenance of a basis column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Eigenvector,
    InitialSolution,
    Correction,
}

impl ColumnKind {
    pub fn tag(self) -> u8 {
        match self {
            ColumnKind::Eigenvector => 0,
            ColumnKind::InitialSolution => 1,
            ColumnKind::Correction => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ColumnKind::Eigenvector),
            1 => Some(ColumnKind::InitialSolution),
            2 => Some(ColumnKind::Correction),
            _ => None,
        }
    }
}

/// `Ã_* + diag(μ)` over any operator.
pub(crate) struct Shifted<'a> {
    pub a: &'a dyn LinearOperator,
    pub mu: &'a [f64],
}

impl LinearOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.a.apply(x, y);
        for ((yi, xi), m) in y.iter_mut().zip(x).zip(self.mu) {
            *yi += m * xi;
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlobalBasis {
    v: Mat,
    a_star_v: Mat,
    kinds: Vec<ColumnKind>,
    k_img: Mat,
    // column j of R, entries 0..=j
    r: Vec<Vec<f64>>,
    mu: Option<Vec<f64>>,
}

impl GlobalBasis {
    /// Starts from `V = [U_0, X_0]`, computing `Ã_* V` once, and factors the
    /// images at `μ_0`. Returns the basis and the indices of any columns
    /// dropped as numerically dependent.
    pub fn from_offline(a_star: &dyn LinearOperator, mu0: &[f64], u0: &Mat, x0: &Mat) -> Result<(Self, Vec<usize>)> {
        let n = a_star.dim();
        if u0.nrows() != n || x0.nrows() != n || mu0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u0.nrows().min(x0.nrows()).min(mu0.len()),
            });
        }
        let mut gb = Self {
            v: Mat::with_rows(n),
            a_star_v: Mat::with_rows(n),
            kinds: Vec::new(),
            k_img: Mat::with_rows(n),
            r: Vec::new(),
            mu: None,
        };
        for c in u0.cols() {
            gb.push_raw(a_star, c, ColumnKind::Eigenvector)?;
        }
        for c in x0.cols() {
            gb.push_raw(a_star, c, ColumnKind::InitialSolution)?;
        }
        let dropped = gb.refresh_system_qr(mu0)?;
        Ok((gb, dropped))
    }

    fn push_raw(&mut self, a_star: &dyn LinearOperator, col: &[f64], kind: ColumnKind) -> Result<()> {
        let img = a_star.apply_vec(col);
        self.v.push_col(col)?;
        self.a_star_v.push_col(&img)?;
        self.kinds.push(kind);
        Ok(())
    }

    /// Rebuilds a basis from stored columns (e.g. a basis file).
    pub fn from_columns(a_star: &dyn LinearOperator, v: Mat, kinds: Vec<ColumnKind>) -> Result<Self> {
        if v.ncols() != kinds.len() || v.nrows() != a_star.dim() {
            return Err(Error::DimensionMismatch {
                expected: v.ncols(),
                got: kinds.len(),
            });
        }
        let mut a_star_v = Mat::with_rows(v.nrows());
        for c in v.cols() {
            a_star_v.push_col(&a_star.apply_vec(c))?;
        }
        Ok(Self {
            k_img: Mat::with_rows(v.nrows()),
            v,
            a_star_v,
            kinds,
            r: Vec::new(),
            mu: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn len(&self) -> usize {
        self.v.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn v(&self) -> &Mat {
        &self.v
    }

    pub fn a_star_v(&self) -> &Mat {
        &self.a_star_v
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn k_img(&self) -> &Mat {
        &self.k_img
    }

    /// Number of leading eigenvector columns.
    pub fn n_eigen(&self) -> usize {
        self.kinds.iter().take_while(|k| **k == ColumnKind::Eigenvector).count()
    }

    /// Dense copy of the triangular factor.
    pub fn r_matrix(&self) -> Mat {
        let m = self.r.len();
        let mut out = Mat::zeros(m, m);
        for (j, col) in self.r.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                out[(i, j)] = *v;
            }
        }
        out
    }

    fn image_column(&self, j: usize, mu: &[f64]) -> Vec<f64> {
        let mut c = self.a_star_v.col(j).to_vec();
        for ((ci, vi), m) in c.iter_mut().zip(self.v.col(j)).zip(mu) {
            *ci += m * vi;
        }
        c
    }

    /// Updates the image QR `(Ã_* + diag(μ)) V = K R` for a new absorption.
    ///
    /// When `μ` matches the factored system only the columns appended since
    /// then are added, one rank-one extension each. Otherwise the factor is
    /// recomputed blockwise from the cached `Ã_* V`: the eigenvector block
    /// first, then the remaining columns projected against it and factored.
    /// Columns whose image is numerically dependent are removed from `V`;
    /// their original indices are returned.
    pub fn refresh_system_qr(&mut self, mu: &[f64]) -> Result<Vec<usize>> {
        if mu.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: mu.len(),
            });
        }
        let same = self.mu.as_deref() == Some(mu);
        let mut dropped = Vec::new();
        if same {
            let mut j = self.r.len();
            while j < self.len() {
                let img = self.image_column(j, mu);
                if !self.extend_qr(img) {
                    dropped.push(j + dropped.len());
                    self.remove_column(j);
                } else {
                    j += 1;
                }
            }
            return Ok(dropped);
        }

        let n = self.dim();
        let total = self.len();
        let ku = self.n_eigen();
        let images: Vec<Vec<f64>> = (0..total).map(|j| self.image_column(j, mu)).collect();
        let mut q = Mat::with_rows(n);
        let mut r: Vec<Vec<f64>> = Vec::with_capacity(total);
        let mut keep = vec![true; total];

        // block 1: eigenvector images
        for j in 0..ku {
            let mut w = images[j].clone();
            if let Some(col) = factor_column(&q, &mut w) {
                q.push_col(&w)?;
                r.push(col);
            } else {
                keep[j] = false;
            }
        }
        // block 2: project the rest against the first block, then factor
        let q1 = q.ncols();
        let mut rest: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(total - ku);
        for img in images.iter().skip(ku) {
            let mut w = img.clone();
            let norm0 = norm2(&w);
            let r12 = orthogonalize(&q, q1, &mut w);
            rest.push((w, r12, norm0));
        }
        for (off, (mut w, r12, norm0)) in rest.into_iter().enumerate() {
            let j = ku + off;
            let c22 = orthogonalize_range(&q, q1, q.ncols(), &mut w);
            let rho = norm2(&w);
            if rho <= RANK_TOL * norm0 || rho == 0.0 {
                keep[j] = false;
                continue;
            }
            scale(1.0 / rho, &mut w);
            let mut col = r12;
            col.extend(c22);
            col.push(rho);
            q.push_col(&w)?;
            r.push(col);
        }

        for j in (0..total).rev() {
            if !keep[j] {
                dropped.push(j);
                self.v.remove_col(j);
                self.a_star_v.remove_col(j);
                self.kinds.remove(j);
            }
        }
        dropped.reverse();
        self.k_img = q;
        self.r = r;
        self.mu = Some(mu.to_vec());
        Ok(dropped)
    }

    fn remove_column(&mut self, j: usize) {
        self.v.remove_col(j);
        self.a_star_v.remove_col(j);
        self.kinds.remove(j);
    }

    fn extend_qr(&mut self, mut img: Vec<f64>) -> bool {
        match factor_column(&self.k_img, &mut img) {
            Some(col) => {
                // push_col cannot fail: img has the right length
                let _ = self.k_img.push_col(&img);
                self.r.push(col);
                true
            }
            None => false,
        }
    }

    /// Appends `col` without updating the factor; the next
    /// [`refresh_system_qr`](Self::refresh_system_qr) picks it up.
    pub fn append_column(&mut self, a_star: &dyn LinearOperator, col: &[f64], kind: ColumnKind) -> Result<()> {
        if col.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: col.len(),
            });
        }
        self.push_raw(a_star, col, kind)
    }

    /// Appends `col` given its image under the currently factored operator,
    /// extending the QR by one column. Returns `false` and leaves the basis
    /// unchanged if the image is numerically in `Range(K)`.
    pub fn append_with_image(&mut self, col: &[f64], image: &[f64], kind: ColumnKind) -> Result<bool> {
        let Some(mu) = self.mu.clone() else {
            return Err(Error::InvalidParameter("basis has no factored system".into()));
        };
        if self.r.len() != self.len() {
            self.refresh_system_qr(&mu)?;
        }
        if col.len() != self.dim() || image.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: col.len(),
            });
        }
        if !self.extend_qr(image.to_vec()) {
            return Ok(false);
        }
        let a_star_col: Vec<f64> = image.iter().zip(col).zip(&mu).map(|((a, c), m)| a - m * c).collect();
        self.v.push_col(col)?;
        self.a_star_v.push_col(&a_star_col)?;
        self.kinds.push(kind);
        Ok(true)
    }

    /// Solves `R w = c`.
    fn solve_r(&self, c: &[f64]) -> Vec<f64> {
        let mut w = c.to_vec();
        for j in (0..self.r.len()).rev() {
            w[j] /= self.r[j][j];
            let wj = w[j];
            for i in 0..j {
                w[i] -= self.r[j][i] * wj;
            }
        }
        w
    }

    /// Residual-minimizing approximation from `Range(V)`:
    /// `x = V R⁻¹ Kᵀ b` and the residual `r = b − K Kᵀ b`.
    pub fn project_solution(&self, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut r = b.to_vec();
        let c = orthogonalize(&self.k_img, self.k_img.ncols(), &mut r);
        let w = self.solve_r(&c);
        (self.v.mul_vec(&w), r)
    }

    /// `max |KᵀK − I|`
    pub fn orthogonality_error(&self) -> f64 {
        self.k_img.tr_mul(&self.k_img).sub(&Mat::identity(self.k_img.ncols())).max_abs()
    }

    /// Recycle space for the right-hand side whose own columns are `members`:
    /// the eigenvector block comes straight from the factor, the rest are
    /// appended with images from the cached products.
    fn recycle_space(&self, base: &RecycleSpace, members: &[usize], mu: &[f64]) -> Result<RecycleSpace> {
        let mut rs = base.clone();
        for &m in members {
            let img = self.image_column(m, mu);
            rs.append_with_image(self.v.col(m), &img)?;
        }
        Ok(rs)
    }

    fn eigen_block_space(&self) -> Result<RecycleSpace> {
        let ku = self.n_eigen();
        let n = self.dim();
        let mut r11 = Mat::zeros(ku, ku);
        for j in 0..ku {
            for i in 0..=j {
                r11[(i, j)] = self.r[j][i];
            }
        }
        // U = V(:, 0..ku) R11⁻¹, solved one row at a time
        let mut u = Mat::zeros(n, ku);
        let mut row = vec![0.0; ku];
        let mut buf = vec![0.0; ku];
        for i in 0..n {
            for j in 0..ku {
                row[j] = self.v[(i, j)];
            }
            // solve z R11 = row, i.e. R11ᵀ zᵀ = rowᵀ
            for j in 0..ku {
                let mut s = row[j];
                for k in 0..j {
                    s -= r11[(k, j)] * buf[k];
                }
                buf[j] = s / r11[(j, j)];
            }
            for j in 0..ku {
                u[(i, j)] = buf[j];
            }
        }
        RecycleSpace::from_parts(u, self.k_img.col_range(0, ku))
    }
}

/// CGS2 of `w` against `q`; normalizes `w` and returns the R column, or
/// `None` if `w` is numerically dependent.
fn factor_column(q: &Mat, w: &mut [f64]) -> Option<Vec<f64>> {
    let norm0 = norm2(w);
    let mut c = orthogonalize(q, q.ncols(), w);
    let rho = norm2(w);
    if rho <= RANK_TOL * norm0 || rho == 0.0 {
        return None;
    }
    scale(1.0 / rho, w);
    c.push(rho);
    Some(c)
}

fn orthogonalize_range(q: &Mat, start: usize, end: usize, v: &mut [f64]) -> Vec<f64> {
    let mut coeffs = vec![0.0; end - start];
    for _pass in 0..2 {
        for j in start..end {
            let c = crate::linalg::dot(q.col(j), v);
            axpy(-c, q.col(j), v);
            coeffs[j - start] += c;
        }
    }
    coeffs
}

/// Indices into `V` of the columns owned by each right-hand side, on top of
/// the shared eigenvector block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerRhsSpaces {
    members: Vec<Vec<usize>>,
}

impl PerRhsSpaces {
    /// Right-hand side `j` starts with column `first + j` (its reference
    /// solution).
    pub fn new(first: usize, n_rhs: usize) -> Self {
        Self {
            members: (0..n_rhs).map(|j| vec![first + j]).collect(),
        }
    }

    pub fn n_rhs(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    /// Accounts for columns removed from `V` (ascending original indices).
    pub fn remap(&mut self, dropped: &[usize]) {
        if dropped.is_empty() {
            return;
        }
        for list in &mut self.members {
            list.retain(|m| dropped.binary_search(m).is_err());
            for m in list.iter_mut() {
                *m -= dropped.partition_point(|d| d < m);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub system: usize,
    pub rhs: usize,
    /// `‖b − Ã x_init‖/‖b‖` before any Krylov iteration.
    pub initial_rel_residual: f64,
    pub iterations: usize,
    pub appended: bool,
    /// Explicitly recomputed `‖b − Ã x‖/‖b‖`.
    pub final_rel_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildLog {
    pub entries: Vec<LogEntry>,
    /// `(system, column index)` of columns dropped during refreshes.
    pub dropped: Vec<(usize, usize)>,
}

impl BuildLog {
    pub fn total_iterations(&self) -> usize {
        self.entries.iter().map(|e| e.iterations).sum()
    }

    pub fn system_iterations(&self, system: usize) -> usize {
        self.entries.iter().filter(|e| e.system == system).map(|e| e.iterations).sum()
    }

    pub fn appends(&self) -> usize {
        self.entries.iter().filter(|e| e.appended).count()
    }

    pub fn iterations_for(&self, system: usize, rhs: usize) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.system == system && e.rhs == rhs)
            .map(|e| e.iterations)
    }
}

/// Everything produced before the first new system.
#[derive(Debug, Clone)]
pub struct InitialBasis {
    pub basis: GlobalBasis,
    pub spaces: PerRhsSpaces,
    pub x0: Mat,
    pub eigen: EigenPairs,
    pub x0_reports: Vec<SolveReport>,
}

impl InitialBasis {
    /// Rebuilds the offline state from a stored `U_0` and `X_0` computed at
    /// `mu0`. Eigenvalues are recovered as Rayleigh quotients; no solve
    /// reports are available.
    pub fn from_saved(a_star: &dyn LinearOperator, mu0: &[f64], u0: Mat, x0: Mat) -> Result<Self> {
        if u0.nrows() != a_star.dim() || x0.nrows() != a_star.dim() {
            return Err(Error::DimensionMismatch {
                expected: a_star.dim(),
                got: if u0.nrows() != a_star.dim() { u0.nrows() } else { x0.nrows() },
            });
        }
        let a0 = Shifted { a: a_star, mu: mu0 };
        let mut values = Vec::with_capacity(u0.ncols());
        let mut residuals = Vec::with_capacity(u0.ncols());
        for u in u0.cols() {
            let mut au = a0.apply_vec(u);
            let lambda = dot(u, &au) / dot(u, u);
            axpy(-lambda, u, &mut au);
            values.push(lambda);
            residuals.push(norm2(&au));
        }
        let (basis, dropped) = GlobalBasis::from_offline(a_star, mu0, &u0, &x0)?;
        let mut spaces = PerRhsSpaces::new(u0.ncols(), x0.ncols());
        spaces.remap(&dropped);
        Ok(Self {
            basis,
            spaces,
            x0,
            eigen: EigenPairs {
                values,
                vectors: u0,
                residuals,
                lanczos_steps: 0,
            },
            x0_reports: Vec::new(),
        })
    }
}

/// Computes `U_0` (the `k_eig` smallest eigenvectors of `Ã_0`) and the
/// reference solutions `Ã_0 X_0 = B` by MINRES, and seeds `V = [U_0, X_0]`.
///
/// `inverse` applies `Ã_0⁻¹` for the shift-invert eigensolver.
pub fn init_basis(
    a_star: &dyn LinearOperator,
    mu0: &[f64],
    b_concat: &Mat,
    inverse: &dyn LinearOperator,
    k_eig: usize,
    settings: &SolverSettings,
    eig: &EigenSettings,
) -> Result<InitialBasis> {
    let a0 = Shifted { a: a_star, mu: mu0 };
    let eigen = smallest_eigenpairs(&a0, inverse, k_eig, eig)?;
    let mut x0 = Mat::with_rows(a_star.dim());
    let mut reports = Vec::with_capacity(b_concat.ncols());
    for (j, b) in b_concat.cols().enumerate() {
        let (x, rep) = minres(&a0, b, settings)?;
        if !rep.converged {
            return Err(Error::InnerSolveFailed {
                system: 0,
                rhs: j,
                iterations: rep.iterations,
                residual: rep.final_rel_residual,
            });
        }
        x0.push_col(&x)?;
        reports.push(rep);
    }
    let (basis, dropped) = GlobalBasis::from_offline(a_star, mu0, &eigen.vectors, &x0)?;
    let mut spaces = PerRhsSpaces::new(eigen.vectors.ncols(), b_concat.ncols());
    spaces.remap(&dropped);
    Ok(InitialBasis {
        basis,
        spaces,
        x0,
        eigen,
        x0_reports: reports,
    })
}

/// Solves `(Ã_* + diag(μ)) X = B` column by column, reusing and growing the
/// global basis.
///
/// Each right-hand side is first projected onto `Range(K)`; if that already
/// meets `settings.tol` no iteration is done. Otherwise the correction
/// equation is solved by MINRES deflated with the right-hand side's own
/// recycle space, and the new direction `y_m` is appended to `V` (and to that
/// right-hand side's space) unless it is numerically redundant.
#[allow(clippy::too_many_arguments)]
pub fn process_system(
    gb: &mut GlobalBasis,
    spaces: &mut PerRhsSpaces,
    a_star: &dyn LinearOperator,
    mu: &[f64],
    b_concat: &Mat,
    settings: &SolverSettings,
    system: usize,
    log: &mut BuildLog,
) -> Result<Mat> {
    if b_concat.ncols() != spaces.n_rhs() {
        return Err(Error::DimensionMismatch {
            expected: spaces.n_rhs(),
            got: b_concat.ncols(),
        });
    }
    let dropped = gb.refresh_system_qr(mu)?;
    spaces.remap(&dropped);
    log.dropped.extend(dropped.iter().map(|&d| (system, d)));

    let op = Shifted { a: a_star, mu };
    let base = gb.eigen_block_space()?;
    let mut x_all = Mat::with_rows(gb.dim());
    for (j, b) in b_concat.cols().enumerate() {
        let bn = norm2(b);
        if bn == 0.0 {
            x_all.push_col(&vec![0.0; gb.dim()])?;
            log.entries.push(LogEntry {
                system,
                rhs: j,
                initial_rel_residual: 0.0,
                iterations: 0,
                appended: false,
                final_rel_residual: 0.0,
            });
            continue;
        }
        let (mut x, r) = gb.project_solution(b);
        let init = norm2(&r) / bn;
        let mut iterations = 0;
        let mut appended = false;
        if init > settings.tol {
            let rs = gb.recycle_space(&base, spaces.members(j), mu)?;
            let sol = recycled_minres(&op, &rs, &r, settings, Some(bn))?;
            if !sol.report.converged {
                return Err(Error::InnerSolveFailed {
                    system,
                    rhs: j,
                    iterations: sol.report.iterations,
                    residual: sol.report.final_rel_residual,
                });
            }
            iterations = sol.report.iterations;
            axpy(1.0, &sol.g, &mut x);
            if gb.append_with_image(&sol.y, &sol.ay, ColumnKind::Correction)? {
                spaces.members[j].push(gb.len() - 1);
                appended = true;
            }
        }
        let final_rel = crate::krylov::residual_norm(&op, b, &x) / bn;
        x_all.push_col(&x)?;
        log.entries.push(LogEntry {
            system,
            rhs: j,
            initial_rel_residual: init,
            iterations,
            appended,
            final_rel_residual: final_rel,
        });
    }
    Ok(x_all)
}

/// Per-right-hand-side recycling without a shared basis: each right-hand side
/// keeps its own columns, seeded with `[U_0, X_0(:, j)]`, and only its own
/// Krylov directions are added.
#[derive(Debug, Clone)]
pub struct BaselineSpaces {
    // (columns, Ã_* images) per right-hand side
    stores: Vec<(Mat, Mat)>,
}

impl BaselineSpaces {
    pub fn new(a_star: &dyn LinearOperator, u0: &Mat, x0: &Mat) -> Result<Self> {
        let shared: Vec<Vec<f64>> = u0.cols().map(|c| a_star.apply_vec(c)).collect();
        let mut stores = Vec::with_capacity(x0.ncols());
        for x in x0.cols() {
            let mut cols = u0.clone();
            let mut imgs = Mat::from_cols(a_star.dim(), &shared)?;
            cols.push_col(x)?;
            imgs.push_col(&a_star.apply_vec(x))?;
            stores.push((cols, imgs));
        }
        Ok(Self { stores })
    }

    pub fn n_rhs(&self) -> usize {
        self.stores.len()
    }

    pub fn columns(&self, j: usize) -> usize {
        self.stores[j].0.ncols()
    }

    /// Solves one system; returns the solutions and appends log rows.
    pub fn solve_system(
        &mut self,
        a_star: &dyn LinearOperator,
        mu: &[f64],
        b_concat: &Mat,
        settings: &SolverSettings,
        system: usize,
        log: &mut BuildLog,
    ) -> Result<Mat> {
        if b_concat.ncols() != self.stores.len() {
            return Err(Error::DimensionMismatch {
                expected: self.stores.len(),
                got: b_concat.ncols(),
            });
        }
        let n = a_star.dim();
        let op = Shifted { a: a_star, mu };
        let mut x_all = Mat::with_rows(n);
        for (j, b) in b_concat.cols().enumerate() {
            let (cols, imgs) = &mut self.stores[j];
            let mut rs = RecycleSpace::new(n);
            for k in 0..cols.ncols() {
                let mut img = imgs.col(k).to_vec();
                for ((v, c), m) in img.iter_mut().zip(cols.col(k)).zip(mu) {
                    *v += m * c;
                }
                rs.append_with_image(cols.col(k), &img)?;
            }
            let bn = norm2(b);
            let (mut x, r) = rs.initial_guess(b);
            let init = if bn > 0.0 { norm2(&r) / bn } else { 0.0 };
            let mut iterations = 0;
            let mut appended = false;
            if init > settings.tol {
                let sol = recycled_minres(&op, &rs, &r, settings, Some(bn))?;
                if !sol.report.converged {
                    return Err(Error::InnerSolveFailed {
                        system,
                        rhs: j,
                        iterations: sol.report.iterations,
                        residual: sol.report.final_rel_residual,
                    });
                }
                iterations = sol.report.iterations;
                axpy(1.0, &sol.g, &mut x);
                let a_star_y: Vec<f64> = sol.ay.iter().zip(&sol.y).zip(mu).map(|((a, y), m)| a - m * y).collect();
                cols.push_col(&sol.y)?;
                imgs.push_col(&a_star_y)?;
                appended = true;
            }
            let final_rel = if bn > 0.0 {
                crate::krylov::residual_norm(&op, b, &x) / bn
            } else {
                0.0
            };
            x_all.push_col(&x)?;
            log.entries.push(LogEntry {
                system,
                rhs: j,
                initial_rel_residual: init,
                iterations,
                appended,
                final_rel_residual: final_rel,
            });
        }
        Ok(x_all)
    }
}

/// Least-squares coefficients `argmin_c ‖V c − x‖` for each column of `x`.
pub fn basis_coefficients(v: &Mat, x: &Mat) -> Result<Mat> {
    if v.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: v.nrows(),
            got: x.nrows(),
        });
    }
    let (q, r) = qr_thin(v)?;
    let mut out = Mat::with_rows(v.ncols());
    for col in x.cols() {
        let c = solve_upper(&r, &q.tr_mul_vec(col))?;
        out.push_col(&c)?;
    }
    Ok(out)
}
