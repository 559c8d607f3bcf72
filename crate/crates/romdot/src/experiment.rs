//! Experiment pipeline shared by the subcommands and the tests: problem
//! setup, synthetic data, inversions, recycling comparison and offline
//! artifacts. Nothing here writes files except the offline cache.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use romdot_core::basis::{basis_coefficients, BaselineSpaces, BuildLog, ColumnKind, InitialBasis};
use romdot_core::inversion::{
    offline_basis, solve, EvalCounts, Evaluator, FomEvaluator, HybridEvaluator, InverseProblem, Outcome,
};
use romdot_core::linalg::{norm2, Mat};
use romdot_core::rom::{fom_solve, fom_transfer, stack, BatchRunner, ForwardProblem};

use crate::config::ExperimentConfig;
use crate::formats::{read_basis, read_manifest, sha256_hex, write_basis, write_manifest, ROMB_VERSION};
use crate::AppError;

pub const OFFLINE_BASIS: &str = "offline.romb";
pub const OFFLINE_MANIFEST: &str = "offline.manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fom,
    RomHybrid,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fom => "fom",
            Mode::RomHybrid => "rom-hybrid",
        }
    }
}

/// A configured forward problem and its starting point.
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub fp: ForwardProblem,
    pub p0: Vec<f64>,
}

impl Setup {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, AppError> {
        let fp = ForwardProblem::new(cfg.grid.clone(), cfg.n_src, cfg.n_det, cfg.pals_model())?;
        let p0 = initial_parameters(&cfg, &fp);
        Ok(Self { cfg, fp, p0 })
    }

    /// Positions of every grid node, row-major from the top row down.
    pub fn image_points(&self) -> Vec<[f64; 2]> {
        let g = self.fp.grid();
        (0..g.ny())
            .rev()
            .flat_map(|j| (0..g.nx()).map(move |i| g.position(i, j)))
            .collect()
    }

    pub fn truth_interior(&self) -> Vec<f64> {
        let p = &self.cfg.pals;
        self.cfg.phantom.rasterize(self.fp.nodes(), p.mu_in, p.mu_out)
    }

    pub fn truth_image(&self) -> Vec<f64> {
        let p = &self.cfg.pals;
        self.cfg.phantom.rasterize(&self.image_points(), p.mu_in, p.mu_out)
    }

    /// Absorption of the level-set model at every grid node, for imaging.
    pub fn reconstruction_image(&self, p: &[f64]) -> Result<Vec<f64>, AppError> {
        Ok(self.fp.pals().eval_absorption(p, &self.image_points())?)
    }
}

/// `m` bumps on a square lattice at the cell centres of the domain, all with
/// the configured weight and dilation.
pub fn initial_parameters(cfg: &ExperimentConfig, fp: &ForwardProblem) -> Vec<f64> {
    let side = (cfg.pals.bumps as f64).sqrt().round() as usize;
    let (x0, x1) = cfg.grid.x_range;
    let (y0, y1) = cfg.grid.y_range;
    let mut centers = Vec::with_capacity(cfg.pals.bumps);
    for j in 0..side {
        for i in 0..side {
            let t = |k: usize| (2 * k + 1) as f64 / (2 * side) as f64;
            centers.push([x0 + t(i) * (x1 - x0), y0 + t(j) * (y1 - y0)]);
        }
    }
    let m = cfg.pals.bumps;
    fp.pals().pack(&vec![cfg.pals.alpha0; m], &vec![cfg.pals.beta0; m], &centers)
}

/// Synthetic measurements of the phantom.
#[derive(Debug, Clone)]
pub struct Measurements {
    /// `Ψ` of the phantom, `n_det × n_src`.
    pub clean: Mat,
    /// `vec(Ψ) + noise`, detectors fastest.
    pub noisy: Vec<f64>,
    pub noise_norm: f64,
}

/// Forward-solves the rasterized phantom and adds relative Gaussian noise
/// `noise · |d_i| · z_i` drawn from a ChaCha stream seeded by `run.seed`.
pub fn simulate(setup: &Setup, runner: &dyn BatchRunner) -> Result<Measurements, AppError> {
    let mu = setup.fp.scale_absorption(&setup.truth_interior());
    let (clean, _) = fom_transfer(&setup.fp, &mu, &setup.cfg.fom_settings(), runner)?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.cfg.run.seed);
    let frac = setup.cfg.run.noise;
    let clean_vec = stack(&clean);
    let noise: Vec<f64> = clean_vec
        .iter()
        .map(|d| {
            let z: f64 = StandardNormal.sample(&mut rng);
            frac * d.abs() * z
        })
        .collect();
    let noisy = clean_vec.iter().zip(&noise).map(|(d, e)| d + e).collect();
    Ok(Measurements {
        clean,
        noisy,
        noise_norm: norm2(&noise),
    })
}

/// Remembers every distinct parameter vector the wrapped evaluator sees.
pub struct Recording<E> {
    pub inner: E,
    pub visited: Vec<Vec<f64>>,
}

impl<E: Evaluator> Recording<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            visited: Vec::new(),
        }
    }

    fn note(&mut self, p: &[f64]) {
        if !self.visited.iter().any(|q| q.as_slice() == p) {
            self.visited.push(p.to_vec());
        }
    }
}

impl<E: Evaluator> Evaluator for Recording<E> {
    fn transfer(&mut self, p: &[f64]) -> romdot_core::Result<Mat> {
        self.note(p);
        self.inner.transfer(p)
    }

    fn jacobian(&mut self, p: &[f64]) -> romdot_core::Result<Mat> {
        self.note(p);
        self.inner.jacobian(p)
    }

    fn counts(&self) -> EvalCounts {
        self.inner.counts()
    }
}

/// What the hybrid evaluator built along the way.
#[derive(Debug, Clone)]
pub struct HybridReport {
    pub log: BuildLog,
    pub basis: Mat,
    pub kinds: Vec<ColumnKind>,
    /// `p0` followed by the parameters of the processed systems.
    pub basis_parameters: Vec<Vec<f64>>,
    /// Solutions `[Ã⁻¹B̃, Ã⁻¹C̃]` at each basis parameter, same order.
    pub solutions: Vec<Mat>,
    pub offline_cached: bool,
}

#[derive(Debug, Clone)]
pub struct Inversion {
    pub mode: Mode,
    pub outcome: Outcome,
    /// Distinct parameter vectors evaluated, in first-visit order.
    pub visited: Vec<Vec<f64>>,
    pub hybrid: Option<HybridReport>,
}

/// Runs the trust-region reconstruction in the given mode. Hybrid mode takes
/// its offline state from `cache_dir` when a matching manifest is there and
/// refreshes the cache otherwise.
pub fn invert(
    setup: &Setup,
    data: &Measurements,
    mode: Mode,
    runner: &dyn BatchRunner,
    cache_dir: Option<&Path>,
) -> Result<Inversion, AppError> {
    let problem = InverseProblem::new(&setup.fp, data.noisy.clone(), data.noise_norm, setup.p0.clone())?;
    let tr = setup.cfg.trust_region();
    match mode {
        Mode::Fom => {
            let mut ev = Recording::new(FomEvaluator::new(&setup.fp, setup.cfg.fom_settings(), runner));
            let outcome = solve(&problem, &setup.fp, &mut ev, &tr)?;
            Ok(Inversion {
                mode,
                outcome,
                visited: ev.visited,
                hybrid: None,
            })
        }
        Mode::RomHybrid => {
            let (init, cached) = offline(setup, cache_dir)?;
            let hy = HybridEvaluator::new(&setup.fp, &setup.p0, init, setup.cfg.run.k_star, setup.cfg.basis_settings())?;
            let mut ev = Recording::new(hy);
            let outcome = solve(&problem, &setup.fp, &mut ev, &tr)?;
            let hy = &ev.inner;
            let basis_parameters: Vec<Vec<f64>> = hy.basis_parameters().map(<[f64]>::to_vec).collect();
            let solutions = basis_parameters
                .iter()
                .map(|p| hy.solutions_at(p).cloned().expect("solutions kept for basis parameters"))
                .collect();
            let report = HybridReport {
                log: hy.log().clone(),
                basis: hy.basis().v().clone(),
                kinds: hy.basis().kinds().to_vec(),
                basis_parameters,
                solutions,
                offline_cached: cached,
            };
            Ok(Inversion {
                mode,
                outcome,
                visited: ev.visited,
                hybrid: Some(report),
            })
        }
    }
}

/// `U_0` and `X_0` at `p0`, loaded from `dir` when its manifest matches the
/// configuration and recomputed (and saved) otherwise. The flag reports a
/// cache hit.
pub fn offline(setup: &Setup, dir: Option<&Path>) -> Result<(InitialBasis, bool), AppError> {
    let mu0 = setup.fp.absorption(&setup.p0)?;
    let hash = sha256_hex(&setup.cfg.offline_fingerprint());
    if let Some(dir) = dir {
        if let Some(init) = load_offline(setup, dir, &hash, &mu0)? {
            return Ok((init, true));
        }
    }
    let init = offline_basis(
        &setup.fp,
        &setup.p0,
        setup.cfg.run.k_eig,
        &setup.cfg.basis_settings(),
        &setup.cfg.eigen_settings(),
    )?;
    if let Some(dir) = dir {
        save_offline(setup, dir, &hash, &init)?;
    }
    Ok((init, false))
}

fn load_offline(setup: &Setup, dir: &Path, hash: &str, mu0: &[f64]) -> Result<Option<InitialBasis>, AppError> {
    let man_path = dir.join(OFFLINE_MANIFEST);
    let basis_path = dir.join(OFFLINE_BASIS);
    if !man_path.exists() || !basis_path.exists() {
        return Ok(None);
    }
    let man = read_manifest(&man_path)?;
    if man.get("config_hash").map(String::as_str) != Some(hash) {
        return Ok(None);
    }
    let bytes = std::fs::read(&basis_path).map_err(|e| AppError::io(&basis_path, e))?;
    if man.get("basis_sha256").map(String::as_str) != Some(sha256_bytes(&bytes).as_str()) {
        return Ok(None);
    }
    let file = read_basis(&basis_path)?;
    let ku = file.kinds.iter().filter(|k| **k == ColumnKind::Eigenvector).count();
    let n_rhs = setup.fp.layout().n_rhs();
    let expect: Vec<ColumnKind> = std::iter::repeat_n(ColumnKind::Eigenvector, ku)
        .chain(std::iter::repeat_n(ColumnKind::InitialSolution, n_rhs))
        .collect();
    if file.kinds != expect || ku != setup.cfg.run.k_eig || file.v.nrows() != setup.fp.n_interior() {
        return Err(AppError::format(&basis_path, "offline basis does not match its manifest"));
    }
    let u0 = file.v.col_range(0, ku);
    let x0 = file.v.col_range(ku, ku + n_rhs);
    Ok(Some(InitialBasis::from_saved(setup.fp.schur(), mu0, u0, x0)?))
}

fn sha256_bytes(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn save_offline(setup: &Setup, dir: &Path, hash: &str, init: &InitialBasis) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let u0 = &init.eigen.vectors;
    let mut v = u0.clone();
    for c in init.x0.cols() {
        v.push_col(c)?;
    }
    let kinds: Vec<ColumnKind> = std::iter::repeat_n(ColumnKind::Eigenvector, u0.ncols())
        .chain(std::iter::repeat_n(ColumnKind::InitialSolution, init.x0.ncols()))
        .collect();
    let basis_path = dir.join(OFFLINE_BASIS);
    write_basis(&basis_path, &v, &kinds)?;
    let bytes = std::fs::read(&basis_path).map_err(|e| AppError::io(&basis_path, e))?;
    let mut man = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        man.insert(k.to_string(), v);
    };
    put("format", "ROMB".into());
    put("version", ROMB_VERSION.to_string());
    put("basis_file", OFFLINE_BASIS.into());
    put("basis_sha256", sha256_bytes(&bytes));
    put("config_hash", hash.into());
    put("n", setup.fp.n_interior().to_string());
    put("k_eig", u0.ncols().to_string());
    put("n_rhs", init.x0.ncols().to_string());
    put("tol_basis", format!("{:e}", setup.cfg.run.tol_basis));
    put("eig_tol", format!("{:e}", setup.cfg.run.eig_tol));
    put("grid", format!("{}x{}", setup.cfg.grid.nx, setup.cfg.grid.ny));
    write_manifest(&dir.join(OFFLINE_MANIFEST), &man)
}

/// One right-hand side of the recycling comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub system: usize,
    pub rhs: usize,
    pub its_ours: usize,
    pub init_relres_ours: f64,
    pub its_baseline: usize,
    pub init_relres_baseline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub total_ours: usize,
    pub total_baseline: usize,
}

/// Inner-outer recycling against per-right-hand-side recycling on systems 1
/// and 2 of the hybrid reconstruction (the first two parameter vectors after
/// `p0` that the optimizer asks about).
pub fn compare_recycling(setup: &Setup, data: &Measurements, cache_dir: Option<&Path>) -> Result<Comparison, AppError> {
    let mut cfg = setup.cfg.clone();
    cfg.run.k_star = cfg.run.k_star.max(2);
    let setup2 = Setup::new(cfg)?;
    let inv = invert(&setup2, data, Mode::RomHybrid, &romdot_core::rom::Sequential, cache_dir)?;
    let report = inv.hybrid.expect("hybrid run");
    if report.basis_parameters.len() < 3 {
        return Err(AppError::Solver(romdot_core::Error::InvalidParameter(
            "the optimizer stopped before visiting two new parameter vectors".into(),
        )));
    }
    let (init, _) = offline(&setup2, cache_dir)?;
    let mut baseline = BaselineSpaces::new(setup2.fp.schur(), &init.eigen.vectors, &init.x0)?;
    let mut base_log = BuildLog::default();
    for (i, p) in report.basis_parameters[1..3].iter().enumerate() {
        let mu = setup2.fp.absorption(p)?;
        baseline.solve_system(
            setup2.fp.schur(),
            &mu,
            &setup2.fp.rhs_concat(),
            &setup2.cfg.basis_settings(),
            i + 1,
            &mut base_log,
        )?;
    }
    let ours: Vec<_> = report.log.entries.iter().filter(|e| e.system <= 2).collect();
    let rows: Vec<CompareRow> = ours
        .iter()
        .zip(&base_log.entries)
        .map(|(o, b)| CompareRow {
            system: o.system,
            rhs: o.rhs,
            its_ours: o.iterations,
            init_relres_ours: o.initial_rel_residual,
            its_baseline: b.iterations,
            init_relres_baseline: b.initial_rel_residual,
        })
        .collect();
    Ok(Comparison {
        total_ours: rows.iter().map(|r| r.its_ours).sum(),
        total_baseline: rows.iter().map(|r| r.its_baseline).sum(),
        rows,
    })
}

/// Full-order solutions at the `system`-th distinct parameter vector visited
/// by the hybrid reconstruction and their coefficients in `basis`.
pub struct Coefficients {
    pub system: usize,
    pub parameters: Vec<f64>,
    /// `r × n_rhs`, along the unit-normalized basis columns.
    pub coefficients: Mat,
}

pub fn held_out_coefficients(
    setup: &Setup,
    inv: &Inversion,
    basis: &Mat,
    system: usize,
    runner: &dyn BatchRunner,
) -> Result<Coefficients, AppError> {
    let p = inv.visited.get(system).ok_or_else(|| {
        AppError::Config(format!(
            "coeffs.system = {system} but the reconstruction visited only {} parameter vectors",
            inv.visited.len()
        ))
    })?;
    if basis.nrows() != setup.fp.n_interior() {
        return Err(AppError::Solver(romdot_core::Error::DimensionMismatch {
            expected: setup.fp.n_interior(),
            got: basis.nrows(),
        }));
    }
    let mu = setup.fp.absorption(p)?;
    let x = fom_solve(
        &setup.fp,
        &mu,
        &setup.fp.layout().b_tilde.iter().chain(&setup.fp.layout().c_tilde).copied().collect::<Vec<_>>(),
        &setup.cfg.fom_settings(),
        runner,
    )?;
    // raw column norms span ~1e-6..5
    let mut coefficients = basis_coefficients(basis, &x)?;
    for (k, v) in basis.cols().enumerate() {
        let s = norm2(v);
        for j in 0..coefficients.ncols() {
            coefficients[(k, j)] *= s;
        }
    }
    Ok(Coefficients {
        system,
        parameters: p.clone(),
        coefficients,
    })
}
