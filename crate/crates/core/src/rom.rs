//! Forward problem, full-order transfer function and Jacobian, and the
//! projected reduced-order model.
//!
//! The transfer function at zero frequency is `Ψ(p) = C̃ᵀ Ã(p)⁻¹ B̃`
//! (`n_det × n_src`); its derivative in `p_k` is `−C̃ᵀ Ã⁻¹ Δ_k Ã⁻¹ B̃` with
//! `Δ_k = ∂Ã/∂p_k` diagonal. The reduced model replaces `Ã` by `Vᵀ Ã V`.

use alloc::vec;
use alloc::vec::Vec;

use crate::discretization::{
    assemble_blocks, build_grid, even_layout, schur_operator, BlockSystem, Grid, GridConfig, SchurOperator,
    SourceDetectorLayout, UnitColumn,
};
use crate::krylov::{minres, SolverSettings};
use crate::linalg::{dot, norm2, qr_thin, BandedCholesky, Cholesky, Mat};
use crate::pals::{DiagonalDerivative, PalsModel};
use crate::{Error, Result};

/// Grid, Schur operator, sources/detectors and the absorption model.
#[derive(Debug, Clone)]
pub struct ForwardProblem {
    grid: Grid,
    blocks: BlockSystem,
    schur: SchurOperator,
    layout: SourceDetectorLayout,
    pals: PalsModel,
    nodes: Vec<[f64; 2]>,
    h2: f64,
}

impl ForwardProblem {
    /// Evenly spaced sources on top, detectors on the bottom.
    pub fn new(cfg: GridConfig, n_src: usize, n_det: usize, pals: PalsModel) -> Result<Self> {
        let grid = build_grid(cfg)?;
        let blocks = assemble_blocks(&grid);
        let layout = even_layout(&blocks, n_src, n_det)?;
        Self::from_parts(grid, blocks, layout, pals)
    }

    pub fn from_parts(grid: Grid, blocks: BlockSystem, layout: SourceDetectorLayout, pals: PalsModel) -> Result<Self> {
        let schur = schur_operator(&blocks)?;
        let nodes = grid.interior_positions();
        let h = grid.spacing();
        Ok(Self {
            grid,
            blocks,
            schur,
            layout,
            pals,
            nodes,
            h2: h * h,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn blocks(&self) -> &BlockSystem {
        &self.blocks
    }

    pub fn schur(&self) -> &SchurOperator {
        &self.schur
    }

    pub fn layout(&self) -> &SourceDetectorLayout {
        &self.layout
    }

    pub fn pals(&self) -> &PalsModel {
        &self.pals
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn n_interior(&self) -> usize {
        self.schur.dim()
    }

    pub fn n_src(&self) -> usize {
        self.layout.n_src()
    }

    pub fn n_det(&self) -> usize {
        self.layout.n_det()
    }

    pub fn n_data(&self) -> usize {
        self.n_src() * self.n_det()
    }

    /// Physical absorption at interior nodes.
    pub fn physical_absorption(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.pals.eval_absorption(p, &self.nodes)
    }

    /// `h²`-scaled absorption, the diagonal added to `Ã_*`.
    pub fn absorption(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.scale_absorption(&self.physical_absorption(p)?))
    }

    pub fn scale_absorption(&self, mu_phys: &[f64]) -> Vec<f64> {
        mu_phys.iter().map(|m| m * self.h2).collect()
    }

    /// `Δ_k = ∂Ã/∂p_k` for all `k`.
    pub fn operator_derivatives(&self, p: &[f64]) -> Result<Vec<DiagonalDerivative>> {
        Ok(self
            .pals
            .absorption_jacobian_all(p, &self.nodes)?
            .into_iter()
            .map(|d| d.scaled(self.h2))
            .collect())
    }

    /// `[B̃, C̃]` as dense columns.
    pub fn rhs_concat(&self) -> Mat {
        self.layout.b_concat()
    }
}

/// Runs independent column jobs; implementations may use threads.
pub trait BatchRunner: Sync {
    fn run(&self, n: usize, job: &(dyn Fn(usize) -> Result<Vec<f64>> + Sync)) -> Result<Vec<Vec<f64>>>;
}

/// Runs jobs in order on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchRunner for Sequential {
    fn run(&self, n: usize, job: &(dyn Fn(usize) -> Result<Vec<f64>> + Sync)) -> Result<Vec<Vec<f64>>> {
        (0..n).map(job).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FomMethod {
    /// Banded Cholesky of `Ã(p)`.
    Direct,
    Minres,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FomSettings {
    pub method: FomMethod,
    /// MINRES settings (ignored by the direct method).
    pub solver: SolverSettings,
}

impl Default for FomSettings {
    fn default() -> Self {
        Self {
            method: FomMethod::Direct,
            solver: SolverSettings::new(1e-10),
        }
    }
}

/// Solves `Ã(μ) X = [unit columns]`.
pub fn fom_solve(
    fp: &ForwardProblem,
    mu: &[f64],
    cols: &[UnitColumn],
    settings: &FomSettings,
    runner: &dyn BatchRunner,
) -> Result<Mat> {
    let n = fp.n_interior();
    if mu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mu.len(),
        });
    }
    let unit = |c: &UnitColumn| {
        let mut b = vec![0.0; n];
        b[c.index] = c.value;
        b
    };
    let out = match settings.method {
        FomMethod::Direct => {
            let f = BandedCholesky::factor(fp.schur.a_star(), Some(mu))?;
            runner.run(cols.len(), &|j| Ok(f.solve(&unit(&cols[j]))))?
        }
        FomMethod::Minres => {
            let op = fp.schur.with_absorption(mu);
            runner.run(cols.len(), &|j| {
                let (x, rep) = minres(&op, &unit(&cols[j]), &settings.solver)?;
                if !rep.converged {
                    return Err(Error::NotConverged {
                        solver: "minres",
                        iterations: rep.iterations,
                        residual: rep.final_rel_residual,
                    });
                }
                Ok(x)
            })?
        }
    };
    Mat::from_cols(n, &out)
}

/// `Ψ[d, s] = C̃(:, d)ᵀ X(:, s)` for unit-column `C̃`.
pub fn transfer_from_solutions(layout: &SourceDetectorLayout, x: &Mat) -> Mat {
    Mat::from_fn(layout.n_det(), x.ncols(), |d, s| {
        let c = layout.c_tilde[d];
        c.value * x[(c.index, s)]
    })
}

/// Full-order transfer function and the forward solutions `Ã⁻¹ B̃`.
pub fn fom_transfer(
    fp: &ForwardProblem,
    mu: &[f64],
    settings: &FomSettings,
    runner: &dyn BatchRunner,
) -> Result<(Mat, Mat)> {
    let x = fom_solve(fp, mu, &fp.layout.b_tilde, settings, runner)?;
    Ok((transfer_from_solutions(&fp.layout, &x), x))
}

/// Adjoint solutions `Ã⁻¹ C̃`.
pub fn fom_adjoint(fp: &ForwardProblem, mu: &[f64], settings: &FomSettings, runner: &dyn BatchRunner) -> Result<Mat> {
    fom_solve(fp, mu, &fp.layout.c_tilde, settings, runner)
}

/// `J[:, k] = vec(−Zᵀ Δ_k X)` with detectors fastest, summing only over the
/// support of each `Δ_k`.
pub fn jacobian_from_solutions(x: &Mat, z: &Mat, deltas: &[DiagonalDerivative]) -> Mat {
    let (ns, nd) = (x.ncols(), z.ncols());
    let mut jac = Mat::zeros(ns * nd, deltas.len());
    for (k, dk) in deltas.iter().enumerate() {
        let col = jac.col_mut(k);
        for (&i, &v) in dk.indices.iter().zip(&dk.values) {
            if v == 0.0 {
                continue;
            }
            for s in 0..ns {
                let xv = v * x[(i, s)];
                for d in 0..nd {
                    col[s * nd + d] -= xv * z[(i, d)];
                }
            }
        }
    }
    jac
}

/// Full-order Jacobian given forward solutions (reused from the transfer
/// evaluation); performs the `n_det` adjoint solves.
pub fn fom_jacobian(
    fp: &ForwardProblem,
    p: &[f64],
    x: &Mat,
    settings: &FomSettings,
    runner: &dyn BatchRunner,
) -> Result<Mat> {
    let mu = fp.absorption(p)?;
    let z = fom_adjoint(fp, &mu, settings, runner)?;
    Ok(jacobian_from_solutions(x, &z, &fp.operator_derivatives(p)?))
}

/// `vec` with the first index fastest.
pub fn stack(m: &Mat) -> Vec<f64> {
    m.as_slice().to_vec()
}

/// Galerkin projection onto `Range(V)`.
///
/// Projections are taken with an orthonormal basis `Q` of `Range(V)`; the
/// transfer function and its gradient depend only on the range, and `Q`
/// keeps the reduced systems as well conditioned as `Ã` itself.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    q: Mat,
    e_r: Mat,
    a_star_r: Mat,
    b_r: Mat,
    c_r: Mat,
}

/// Projects `Ã_*`, `B̃`, `C̃` onto `Range(V)`.
pub fn reduce(v: &Mat, fp: &ForwardProblem) -> Result<ReducedModel> {
    let n = fp.n_interior();
    if v.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.nrows(),
        });
    }
    let mut vn = v.clone();
    for j in 0..vn.ncols() {
        let s = norm2(vn.col(j));
        if s == 0.0 {
            return Err(Error::Singular);
        }
        vn.col_mut(j).iter_mut().for_each(|x| *x /= s);
    }
    let e_r = vn.tr_mul(&vn);
    Cholesky::factor(&e_r)?;
    let (q, _) = qr_thin(&vn)?;
    let a = fp.schur.a_star();
    let mut aq = Mat::with_rows(n);
    for c in q.cols() {
        aq.push_col(&a.mul_vec(c))?;
    }
    let mut a_star_r = q.tr_mul(&aq);
    symmetrize(&mut a_star_r);
    let rows = |cols: &[UnitColumn]| {
        Mat::from_fn(q.ncols(), cols.len(), |i, j| cols[j].value * q[(cols[j].index, i)])
    };
    let b_r = rows(&fp.layout.b_tilde);
    let c_r = rows(&fp.layout.c_tilde);
    Ok(ReducedModel {
        q,
        e_r,
        a_star_r,
        b_r,
        c_r,
    })
}

fn symmetrize(m: &mut Mat) {
    let r = m.nrows();
    for j in 0..r {
        for i in 0..j {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

/// Reduced solutions for one parameter.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub psi: Mat,
    /// `Ã_r⁻¹ B_r`
    pub y_b: Mat,
    /// `Ã_r⁻¹ C_r`
    pub y_c: Mat,
}

impl ReducedModel {
    pub fn order(&self) -> usize {
        self.q.ncols()
    }

    pub fn basis(&self) -> &Mat {
        &self.q
    }

    /// Gram matrix of the column-normalized input basis.
    pub fn e_r(&self) -> &Mat {
        &self.e_r
    }

    pub fn a_star_r(&self) -> &Mat {
        &self.a_star_r
    }

    pub fn b_r(&self) -> &Mat {
        &self.b_r
    }

    pub fn c_r(&self) -> &Mat {
        &self.c_r
    }

    /// `Ã_r(μ) = A_*r + Qᵀ diag(μ) Q`.
    pub fn operator(&self, mu: &[f64]) -> Result<Mat> {
        let (n, r) = (self.q.nrows(), self.q.ncols());
        if mu.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
        }
        let mut a = self.a_star_r.clone();
        let mut scaled = vec![0.0; n];
        for j in 0..r {
            for ((s, q), m) in scaled.iter_mut().zip(self.q.col(j)).zip(mu) {
                *s = m * q;
            }
            for i in 0..=j {
                let v = dot(self.q.col(i), &scaled);
                a[(i, j)] += v;
                if i != j {
                    a[(j, i)] += v;
                }
            }
        }
        Ok(a)
    }

    fn factor(&self, mu: &[f64]) -> Result<Cholesky> {
        Cholesky::factor(&self.operator(mu)?).map_err(|_| Error::IndefiniteReducedOperator)
    }

    /// `Ψ_r = C_rᵀ Ã_r⁻¹ B_r`.
    pub fn transfer(&self, mu: &[f64]) -> Result<Mat> {
        Ok(self.solve(mu)?.psi)
    }

    pub fn solve(&self, mu: &[f64]) -> Result<ReducedSolution> {
        let f = self.factor(mu)?;
        let y_b = f.solve_mat(&self.b_r);
        let y_c = f.solve_mat(&self.c_r);
        let psi = self.c_r.tr_mul(&y_b);
        Ok(ReducedSolution { psi, y_b, y_c })
    }

    /// Reduced Jacobian `vec(−Y_cᵀ Qᵀ Δ_k Q Y_b)`, evaluated as support sums of
    /// the lifted solutions `Q Y_b`, `Q Y_c` so each `Δ_k` only touches the
    /// rows of its own support.
    pub fn jacobian(&self, sol: &ReducedSolution, deltas: &[DiagonalDerivative]) -> Mat {
        let wb = self.q.mul(&sol.y_b);
        let wc = self.q.mul(&sol.y_c);
        jacobian_from_solutions(&wb, &wc, deltas)
    }
}
