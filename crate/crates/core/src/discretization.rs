//! Finite-difference blocks of the zero-frequency diffusion model on a
//! rectangular slab and the Schur-complement operator over interior nodes.
//!
//! Unknowns are ordered boundary first (bottom row then top row, each left to
//! right) followed by interior rows `1..ny-1`, lexicographically. The left
//! and right columns carry homogeneous Dirichlet data through ghost nodes one
//! spacing outside the domain, so every node of an interior row is an
//! unknown and the interior block has dimension `(ny-2) nx`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, Mat};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// `[a1, b1]`
    pub x_range: (f64, f64),
    /// `[a3, b3]`
    pub y_range: (f64, f64),
    pub diffusion: f64,
    /// Robin reflection constant.
    pub boundary_constant: f64,
    /// Speed of light in the medium; carried for completeness, unused at zero
    /// frequency.
    pub light_speed: f64,
}

impl GridConfig {
    /// Unit-square slab with unit physical constants.
    pub fn unit_square(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            diffusion: 1.0,
            boundary_constant: 1.0,
            light_speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    cfg: GridConfig,
    h: f64,
}

/// Validates `cfg` and returns the grid.
pub fn build_grid(cfg: GridConfig) -> Result<Grid> {
    if cfg.nx < 5 || cfg.ny < 5 {
        return Err(Error::InvalidGrid(format!(
            "need at least 5 nodes per direction, got {}x{}",
            cfg.nx, cfg.ny
        )));
    }
    let wx = cfg.x_range.1 - cfg.x_range.0;
    let wy = cfg.y_range.1 - cfg.y_range.0;
    if !(wx > 0.0 && wy > 0.0) {
        return Err(Error::InvalidGrid(format!("empty domain {wx} x {wy}")));
    }
    let h = wx / (cfg.nx - 1) as f64;
    let hy = wy / (cfg.ny - 1) as f64;
    if (hy - h).abs() > 1e-12 * h {
        return Err(Error::InvalidGrid(format!(
            "cells must be square: hx = {h}, hy = {hy}"
        )));
    }
    for (name, v) in [
        ("diffusion", cfg.diffusion),
        ("boundary constant", cfg.boundary_constant),
        ("light speed", cfg.light_speed),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidGrid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(Grid { cfg, h })
}

impl Grid {
    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn nx(&self) -> usize {
        self.cfg.nx
    }

    pub fn ny(&self) -> usize {
        self.cfg.ny
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        self.cfg.nx * self.cfg.ny
    }

    pub fn n_boundary(&self) -> usize {
        2 * self.cfg.nx
    }

    pub fn n_interior(&self) -> usize {
        (self.cfg.ny - 2) * self.cfg.nx
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_boundary() + self.n_interior()
    }

    pub fn position(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.cfg.x_range.0 + i as f64 * self.h,
            self.cfg.y_range.0 + j as f64 * self.h,
        ]
    }

    /// Index among boundary unknowns of node `(i, j)`, if it lies on the
    /// bottom (`j = 0`) or top (`j = ny-1`) row.
    pub fn boundary_index(&self, i: usize, j: usize) -> Option<usize> {
        let nx = self.cfg.nx;
        if i >= nx {
            return None;
        }
        if j == 0 {
            Some(i)
        } else if j == self.cfg.ny - 1 {
            Some(nx + i)
        } else {
            None
        }
    }

    /// Index among interior unknowns of node `(i, j)`.
    pub fn interior_index(&self, i: usize, j: usize) -> Option<usize> {
        let nx = self.cfg.nx;
        (i < nx && j >= 1 && j + 1 < self.cfg.ny).then(|| (j - 1) * nx + i)
    }

    /// Position of `(i, j)` in the full boundary-first numbering.
    pub fn unknown_index(&self, i: usize, j: usize) -> Option<usize> {
        self.boundary_index(i, j)
            .or_else(|| self.interior_index(i, j).map(|k| k + self.n_boundary()))
    }

    /// Grid coordinates `(i, j)` of interior unknown `k`.
    pub fn interior_node(&self, k: usize) -> (usize, usize) {
        (k % self.cfg.nx, k / self.cfg.nx + 1)
    }

    /// Grid coordinates `(i, j)` of boundary unknown `b`.
    pub fn boundary_node(&self, b: usize) -> (usize, usize) {
        let nx = self.cfg.nx;
        if b < nx {
            (b, 0)
        } else {
            (b - nx, self.cfg.ny - 1)
        }
    }

    pub fn interior_positions(&self) -> Vec<[f64; 2]> {
        (0..self.n_interior())
            .map(|k| {
                let (i, j) = self.interior_node(k);
                self.position(i, j)
            })
            .collect()
    }

    /// Boundary-unknown index of top-row column `i`.
    pub fn top_node(&self, i: usize) -> usize {
        self.cfg.nx + i
    }

    /// Boundary-unknown index of bottom-row column `i`.
    pub fn bottom_node(&self, i: usize) -> usize {
        i
    }
}

/// The four blocks `[[G, D1], [D2, F]]` of the full system at zero frequency,
/// with `F = L + diag(h² μ)`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    grid: Grid,
    /// Diagonal of `G` over the boundary unknowns.
    pub g: Vec<f64>,
    /// Boundary to interior coupling, `2nx × (ny-2)nx`.
    pub d1: CsrMatrix,
    /// Interior to boundary coupling, `(ny-2)nx × 2nx`.
    pub d2: CsrMatrix,
    /// `h²`-scaled interior diffusion operator.
    pub l: CsrMatrix,
}

pub fn assemble_blocks(grid: &Grid) -> BlockSystem {
    let nx = grid.nx();
    let ny = grid.ny();
    let d0 = grid.cfg.diffusion;
    let kappa = 2.0 * grid.cfg.boundary_constant * d0 / grid.h;

    let mut g = vec![0.0; grid.n_boundary()];
    let mut d1 = Vec::new();
    for i in 0..nx {
        for (j, jin) in [(0, 1), (ny - 1, ny - 2)] {
            let b = grid.boundary_index(i, j).unwrap();
            g[b] = 1.0 + kappa;
            d1.push((b, grid.interior_index(i, jin).unwrap(), -kappa));
        }
    }

    let mut l = Vec::new();
    let mut d2 = Vec::new();
    for k in 0..grid.n_interior() {
        let (i, j) = grid.interior_node(k);
        l.push((k, k, 4.0 * d0));
        let neighbours = [
            (i.wrapping_sub(1), j),
            (i + 1, j),
            (i, j - 1),
            (i, j + 1),
        ];
        for (ni, nj) in neighbours {
            if let Some(m) = grid.interior_index(ni, nj) {
                l.push((k, m, -d0));
            } else if let Some(b) = grid.boundary_index(ni, nj) {
                d2.push((k, b, -d0));
            }
            // otherwise a Dirichlet ghost outside the left/right edge
        }
    }

    let nb = grid.n_boundary();
    let ni = grid.n_interior();
    BlockSystem {
        grid: grid.clone(),
        g,
        d1: CsrMatrix::from_triplets(nb, ni, &d1),
        d2: CsrMatrix::from_triplets(ni, nb, &d2),
        l: CsrMatrix::from_triplets(ni, ni, &l),
    }
}

impl BlockSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Dense `[[G, D1], [D2, L + diag(mu)]]` in boundary-first numbering.
    /// Only for oracles on small grids.
    pub fn full_block_matrix(&self, mu: &[f64]) -> Result<Mat> {
        const LIMIT: usize = 2500;
        let n = self.grid.n_unknowns();
        if n > LIMIT {
            return Err(Error::TooLarge { size: n, limit: LIMIT });
        }
        let ni = self.grid.n_interior();
        if mu.len() != ni {
            return Err(Error::DimensionMismatch {
                expected: ni,
                got: mu.len(),
            });
        }
        let nb = self.grid.n_boundary();
        let mut a = Mat::zeros(n, n);
        for (b, &gb) in self.g.iter().enumerate() {
            a[(b, b)] = gb;
        }
        for (r, c, v) in self.d1.triplets() {
            a[(r, nb + c)] += v;
        }
        for (r, c, v) in self.d2.triplets() {
            a[(nb + r, c)] += v;
        }
        for (r, c, v) in self.l.triplets() {
            a[(nb + r, nb + c)] += v;
        }
        for (k, &m) in mu.iter().enumerate() {
            a[(nb + k, nb + k)] += m;
        }
        Ok(a)
    }
}

/// `Ã(μ) = Ã_* + diag(μ)` with `Ã_* = L - D2 G⁻¹ D1`.
///
/// `μ` is the `h²`-scaled absorption at interior nodes.
#[derive(Debug, Clone)]
pub struct SchurOperator {
    a_star: CsrMatrix,
}

pub fn schur_operator(blocks: &BlockSystem) -> Result<SchurOperator> {
    if blocks.g.iter().any(|&g| g == 0.0 || !g.is_finite()) {
        return Err(Error::Singular);
    }
    let mut t: Vec<_> = blocks.l.triplets().collect();
    // D2 G⁻¹ D1: each boundary node b couples to the interior rows of D2(:, b)
    // and the interior columns of D1(b, :)
    let d2t = blocks.d2.transpose();
    for (b, &gb) in blocks.g.iter().enumerate() {
        for (r, v2) in d2t.row(b) {
            for (c, v1) in blocks.d1.row(b) {
                t.push((r, c, -v2 * v1 / gb));
            }
        }
    }
    let n = blocks.l.nrows();
    Ok(SchurOperator {
        a_star: CsrMatrix::from_triplets(n, n, &t),
    })
}

impl SchurOperator {
    pub fn from_matrix(a_star: CsrMatrix) -> Self {
        Self { a_star }
    }

    pub fn dim(&self) -> usize {
        self.a_star.nrows()
    }

    pub fn a_star(&self) -> &CsrMatrix {
        &self.a_star
    }

    /// `y = Ã_* x + μ ⊙ x`
    pub fn apply(&self, mu: &[f64], x: &[f64], y: &mut [f64]) {
        self.a_star.mul_vec_into(x, y);
        for ((yi, m), xi) in y.iter_mut().zip(mu).zip(x) {
            *yi += m * xi;
        }
    }

    /// `Ã(μ)` as a linear operator.
    pub fn with_absorption<'a>(&'a self, mu: &'a [f64]) -> ShiftedOperator<'a> {
        debug_assert_eq!(mu.len(), self.dim());
        ShiftedOperator { op: self, mu }
    }

    /// `Ã(μ)` assembled as a sparse matrix.
    pub fn matrix(&self, mu: &[f64]) -> CsrMatrix {
        self.a_star.add_diagonal(mu)
    }
}

/// Borrowed view of `Ã_* + diag(μ)`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedOperator<'a> {
    op: &'a SchurOperator,
    mu: &'a [f64],
}

impl ShiftedOperator<'_> {
    pub fn mu(&self) -> &[f64] {
        self.mu
    }
}

impl LinearOperator for ShiftedOperator<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(self.mu, x, y);
    }
}

impl LinearOperator for SchurOperator {
    fn dim(&self) -> usize {
        self.a_star.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.a_star.mul_vec_into(x, y);
    }
}

/// A column with a single nonzero entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitColumn {
    pub index: usize,
    pub value: f64,
}

/// Sources on the top boundary, detectors on the bottom, and their effective
/// interior counterparts `B̃ = D2 G⁻¹ B1`, `C̃ᵀ = C1ᵀ G⁻¹ D1`.
#[derive(Debug, Clone)]
pub struct SourceDetectorLayout {
    /// Boundary-unknown indices of the sources.
    pub src_nodes: Vec<usize>,
    /// Boundary-unknown indices of the detectors.
    pub det_nodes: Vec<usize>,
    pub b_tilde: Vec<UnitColumn>,
    pub c_tilde: Vec<UnitColumn>,
    n_interior: usize,
}

pub fn effective_layout(
    blocks: &BlockSystem,
    src_nodes: &[usize],
    det_nodes: &[usize],
) -> Result<SourceDetectorLayout> {
    let grid = &blocks.grid;
    let ny = grid.ny();
    for &s in src_nodes {
        if s >= grid.n_boundary() || grid.boundary_node(s).1 != ny - 1 {
            return Err(Error::InvalidLayout(format!("source node {s} is not on the top boundary")));
        }
    }
    for &d in det_nodes {
        if d >= grid.n_boundary() || grid.boundary_node(d).1 != 0 {
            return Err(Error::InvalidLayout(format!(
                "detector node {d} is not on the bottom boundary"
            )));
        }
    }
    if let Some(s) = src_nodes.iter().find(|s| det_nodes.contains(s)) {
        return Err(Error::InvalidLayout(format!("node {s} is both source and detector")));
    }
    if src_nodes.is_empty() || det_nodes.is_empty() {
        return Err(Error::InvalidLayout("need at least one source and one detector".into()));
    }

    let d2t = blocks.d2.transpose();
    let b_tilde = src_nodes
        .iter()
        .map(|&b| single_entry(d2t.row(b), blocks.g[b], b))
        .collect::<Result<Vec<_>>>()?;
    let c_tilde = det_nodes
        .iter()
        .map(|&b| single_entry(blocks.d1.row(b), blocks.g[b], b))
        .collect::<Result<Vec<_>>>()?;
    Ok(SourceDetectorLayout {
        src_nodes: src_nodes.to_vec(),
        det_nodes: det_nodes.to_vec(),
        b_tilde,
        c_tilde,
        n_interior: grid.n_interior(),
    })
}

fn single_entry(
    mut row: impl Iterator<Item = (usize, f64)>,
    g: f64,
    node: usize,
) -> Result<UnitColumn> {
    match (row.next(), row.next()) {
        (Some((index, v)), None) => Ok(UnitColumn { index, value: v / g }),
        _ => Err(Error::InvalidLayout(format!(
            "boundary node {node} must couple to exactly one interior node"
        ))),
    }
}

/// `n` nodes evenly spread over columns `1..nx-1` (corners excluded).
pub fn evenly_spaced_columns(nx: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n > nx - 2 {
        return Err(Error::InvalidLayout(format!(
            "cannot place {n} nodes on {} non-corner columns",
            nx - 2
        )));
    }
    let span = (nx - 2) as f64;
    Ok((0..n)
        .map(|k| 1 + libm::floor((k as f64 + 0.5) * span / n as f64) as usize)
        .collect())
}

/// Sources evenly spaced on the top boundary and detectors on the bottom.
pub fn even_layout(blocks: &BlockSystem, n_src: usize, n_det: usize) -> Result<SourceDetectorLayout> {
    let grid = &blocks.grid;
    let src: Vec<_> = evenly_spaced_columns(grid.nx(), n_src)?
        .into_iter()
        .map(|i| grid.top_node(i))
        .collect();
    let det: Vec<_> = evenly_spaced_columns(grid.nx(), n_det)?
        .into_iter()
        .map(|i| grid.bottom_node(i))
        .collect();
    effective_layout(blocks, &src, &det)
}

impl SourceDetectorLayout {
    pub fn n_src(&self) -> usize {
        self.src_nodes.len()
    }

    pub fn n_det(&self) -> usize {
        self.det_nodes.len()
    }

    pub fn n_rhs(&self) -> usize {
        self.n_src() + self.n_det()
    }

    fn dense(&self, cols: &[UnitColumn]) -> Mat {
        let mut m = Mat::zeros(self.n_interior, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m[(c.index, j)] = c.value;
        }
        m
    }

    pub fn b_tilde_dense(&self) -> Mat {
        self.dense(&self.b_tilde)
    }

    pub fn c_tilde_dense(&self) -> Mat {
        self.dense(&self.c_tilde)
    }

    /// `[B̃, C̃]`: sources first, then detectors.
    pub fn b_concat(&self) -> Mat {
        let cols: Vec<UnitColumn> = self.b_tilde.iter().chain(&self.c_tilde).copied().collect();
        self.dense(&cols)
    }

    /// Dense boundary-first `B` and `C` of the full model (unit columns).
    pub fn full_b_c(&self, grid: &Grid) -> (Mat, Mat) {
        let n = grid.n_unknowns();
        let mut b = Mat::zeros(n, self.n_src());
        for (j, &s) in self.src_nodes.iter().enumerate() {
            b[(s, j)] = 1.0;
        }
        let mut c = Mat::zeros(n, self.n_det());
        for (j, &d) in self.det_nodes.iter().enumerate() {
            c[(d, j)] = 1.0;
        }
        (b, c)
    }
}
