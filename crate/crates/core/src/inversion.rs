//! Nonlinear least-squares fit of PaLS parameters to boundary data with a
//! trust-region Gauss-Newton (dogleg) driver.
//!
//! Transfer functions and Jacobians come from an [`Evaluator`]: full order,
//! reduced order, or the hybrid that feeds the first parameters it sees into
//! the basis builder and then switches to the reduced model.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{init_basis, process_system, BuildLog, GlobalBasis, InitialBasis, PerRhsSpaces};
use crate::krylov::{EigenSettings, SolverSettings};
use crate::linalg::{dot, norm2, sqrt, symmetric_eigen, BandedCholesky, Mat};
use crate::rom::{
    fom_adjoint, fom_transfer, jacobian_from_solutions, reduce, stack, transfer_from_solutions, BatchRunner,
    FomSettings, ForwardProblem, ReducedModel, ReducedSolution,
};
use crate::{Error, Result};

/// Work done by an evaluator so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub fevals: usize,
    pub jevals: usize,
    /// Full-order (interior-dimension) linear solves.
    pub full_solves: usize,
}

/// Source of `Ψ(p)` and `∂ vec(Ψ)/∂p`.
pub trait Evaluator {
    /// `n_det × n_src` transfer function.
    fn transfer(&mut self, p: &[f64]) -> Result<Mat>;
    /// `(n_src n_det) × n_params`, detectors fastest.
    fn jacobian(&mut self, p: &[f64]) -> Result<Mat>;
    fn counts(&self) -> EvalCounts;
}

/// Full-order evaluator; forward solutions of the last transfer call are
/// reused by the Jacobian, which adds the adjoint solves.
pub struct FomEvaluator<'a> {
    fp: &'a ForwardProblem,
    settings: FomSettings,
    runner: &'a dyn BatchRunner,
    cache: Option<(Vec<f64>, Mat)>,
    counts: EvalCounts,
}

impl<'a> FomEvaluator<'a> {
    pub fn new(fp: &'a ForwardProblem, settings: FomSettings, runner: &'a dyn BatchRunner) -> Self {
        Self {
            fp,
            settings,
            runner,
            cache: None,
            counts: EvalCounts::default(),
        }
    }

    fn forward(&mut self, p: &[f64]) -> Result<(Mat, Mat)> {
        let mu = self.fp.absorption(p)?;
        let (psi, x) = fom_transfer(self.fp, &mu, &self.settings, self.runner)?;
        self.counts.full_solves += self.fp.n_src();
        self.cache = Some((p.to_vec(), x.clone()));
        Ok((psi, x))
    }
}

impl Evaluator for FomEvaluator<'_> {
    fn transfer(&mut self, p: &[f64]) -> Result<Mat> {
        self.counts.fevals += 1;
        Ok(self.forward(p)?.0)
    }

    fn jacobian(&mut self, p: &[f64]) -> Result<Mat> {
        self.counts.jevals += 1;
        let x = match &self.cache {
            Some((q, x)) if q.as_slice() == p => x.clone(),
            _ => self.forward(p)?.1,
        };
        let mu = self.fp.absorption(p)?;
        let z = fom_adjoint(self.fp, &mu, &self.settings, self.runner)?;
        self.counts.full_solves += self.fp.n_det();
        Ok(jacobian_from_solutions(&x, &z, &self.fp.operator_derivatives(p)?))
    }

    fn counts(&self) -> EvalCounts {
        self.counts
    }
}

/// Reduced-order evaluator over a fixed model.
pub struct RomEvaluator<'a> {
    fp: &'a ForwardProblem,
    rm: ReducedModel,
    cache: Option<(Vec<f64>, ReducedSolution)>,
    counts: EvalCounts,
}

impl<'a> RomEvaluator<'a> {
    pub fn new(fp: &'a ForwardProblem, rm: ReducedModel) -> Self {
        Self {
            fp,
            rm,
            cache: None,
            counts: EvalCounts::default(),
        }
    }

    pub fn model(&self) -> &ReducedModel {
        &self.rm
    }
}

fn rom_solution(fp: &ForwardProblem, rm: &ReducedModel, cache: &mut Option<(Vec<f64>, ReducedSolution)>, p: &[f64]) -> Result<ReducedSolution> {
    if let Some((q, sol)) = cache {
        if q.as_slice() == p {
            return Ok(sol.clone());
        }
    }
    let sol = rm.solve(&fp.absorption(p)?)?;
    *cache = Some((p.to_vec(), sol.clone()));
    Ok(sol)
}

impl Evaluator for RomEvaluator<'_> {
    fn transfer(&mut self, p: &[f64]) -> Result<Mat> {
        self.counts.fevals += 1;
        Ok(rom_solution(self.fp, &self.rm, &mut self.cache, p)?.psi)
    }

    fn jacobian(&mut self, p: &[f64]) -> Result<Mat> {
        self.counts.jevals += 1;
        let sol = rom_solution(self.fp, &self.rm, &mut self.cache, p)?;
        Ok(self.rm.jacobian(&sol, &self.fp.operator_derivatives(p)?))
    }

    fn counts(&self) -> EvalCounts {
        self.counts
    }
}

/// Computes `U_0` and `X_0` at `p0` for the forward problem.
pub fn offline_basis(
    fp: &ForwardProblem,
    p0: &[f64],
    k_eig: usize,
    settings: &SolverSettings,
    eig: &EigenSettings,
) -> Result<InitialBasis> {
    let mu0 = fp.absorption(p0)?;
    let factor = BandedCholesky::factor(fp.schur().a_star(), Some(&mu0))?;
    init_basis(fp.schur(), &mu0, &fp.rhs_concat(), &factor, k_eig, settings, eig)
}

/// Builds the global basis from the first `K_*` new parameter vectors it is
/// asked about, answering those requests with the full-order solutions, and
/// serves every later request from the reduced model.
pub struct HybridEvaluator<'a> {
    fp: &'a ForwardProblem,
    basis: GlobalBasis,
    spaces: PerRhsSpaces,
    log: BuildLog,
    settings: SolverSettings,
    k_star: usize,
    // parameter vectors with full-order solutions [Ã⁻¹B̃, Ã⁻¹C̃]
    solved: Vec<(Vec<f64>, Mat)>,
    rom: Option<ReducedModel>,
    rom_cache: Option<(Vec<f64>, ReducedSolution)>,
    counts: EvalCounts,
}

impl<'a> HybridEvaluator<'a> {
    /// `init` must have been computed at `p0`; its solutions answer requests
    /// at `p0` and count as full-order solves.
    pub fn new(
        fp: &'a ForwardProblem,
        p0: &[f64],
        init: InitialBasis,
        k_star: usize,
        settings: SolverSettings,
    ) -> Result<Self> {
        let counts = EvalCounts {
            full_solves: init.x0.ncols(),
            ..EvalCounts::default()
        };
        let mut ev = Self {
            fp,
            basis: init.basis,
            spaces: init.spaces,
            log: BuildLog::default(),
            settings,
            k_star,
            solved: vec![(p0.to_vec(), init.x0)],
            rom: None,
            rom_cache: None,
            counts,
        };
        if k_star == 0 {
            ev.finish_basis()?;
        }
        Ok(ev)
    }

    fn finish_basis(&mut self) -> Result<()> {
        self.rom = Some(reduce(self.basis.v(), self.fp)?);
        Ok(())
    }

    pub fn basis(&self) -> &GlobalBasis {
        &self.basis
    }

    pub fn spaces(&self) -> &PerRhsSpaces {
        &self.spaces
    }

    pub fn log(&self) -> &BuildLog {
        &self.log
    }

    pub fn reduced_model(&self) -> Option<&ReducedModel> {
        self.rom.as_ref()
    }

    /// Systems fed to the basis builder so far.
    pub fn systems_processed(&self) -> usize {
        self.solved.len() - 1
    }

    /// Parameter vectors with full-order solutions, `p0` first.
    pub fn basis_parameters(&self) -> impl Iterator<Item = &[f64]> {
        self.solved.iter().map(|(p, _)| p.as_slice())
    }

    /// Full-order solutions `[Ã⁻¹B̃, Ã⁻¹C̃]` at `p`, if available.
    pub fn solutions_at(&self, p: &[f64]) -> Option<&Mat> {
        self.solved.iter().find(|(q, _)| q.as_slice() == p).map(|(_, x)| x)
    }

    fn full_order(&mut self, p: &[f64]) -> Result<Option<Mat>> {
        if let Some(x) = self.solutions_at(p) {
            return Ok(Some(x.clone()));
        }
        if self.rom.is_some() {
            return Ok(None);
        }
        let system = self.solved.len();
        let mu = self.fp.absorption(p)?;
        let before = self.log.entries.len();
        let x = process_system(
            &mut self.basis,
            &mut self.spaces,
            self.fp.schur(),
            &mu,
            &self.fp.rhs_concat(),
            &self.settings,
            system,
            &mut self.log,
        )?;
        self.counts.full_solves += self.log.entries[before..].iter().filter(|e| e.iterations > 0).count();
        self.solved.push((p.to_vec(), x.clone()));
        if system == self.k_star {
            self.finish_basis()?;
        }
        Ok(Some(x))
    }
}

impl Evaluator for HybridEvaluator<'_> {
    fn transfer(&mut self, p: &[f64]) -> Result<Mat> {
        self.counts.fevals += 1;
        match self.full_order(p)? {
            Some(x) => Ok(transfer_from_solutions(self.fp.layout(), &x.col_range(0, self.fp.n_src()))),
            None => {
                let rm = self.rom.as_ref().ok_or(Error::Breakdown("reduced model missing"))?;
                Ok(rom_solution(self.fp, rm, &mut self.rom_cache, p)?.psi)
            }
        }
    }

    fn jacobian(&mut self, p: &[f64]) -> Result<Mat> {
        self.counts.jevals += 1;
        let deltas = self.fp.operator_derivatives(p)?;
        match self.full_order(p)? {
            Some(x) => {
                let ns = self.fp.n_src();
                Ok(jacobian_from_solutions(
                    &x.col_range(0, ns),
                    &x.col_range(ns, x.ncols()),
                    &deltas,
                ))
            }
            None => {
                let rm = self.rom.as_ref().ok_or(Error::Breakdown("reduced model missing"))?;
                let sol = rom_solution(self.fp, rm, &mut self.rom_cache, p)?;
                Ok(rm.jacobian(&sol, &deltas))
            }
        }
    }

    fn counts(&self) -> EvalCounts {
        self.counts
    }
}

/// Measured data and the starting point.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    /// `vec(Ψ)` of the measurements, detectors fastest.
    pub data: Vec<f64>,
    pub noise_norm: f64,
    pub p0: Vec<f64>,
}

impl InverseProblem {
    pub fn new(fp: &ForwardProblem, data: Vec<f64>, noise_norm: f64, p0: Vec<f64>) -> Result<Self> {
        if data.len() != fp.n_data() {
            return Err(Error::DimensionMismatch {
                expected: fp.n_data(),
                got: data.len(),
            });
        }
        if p0.len() != fp.pals().n_params() {
            return Err(Error::DimensionMismatch {
                expected: fp.pals().n_params(),
                got: p0.len(),
            });
        }
        Ok(Self { data, noise_norm, p0 })
    }
}

/// `vec(Ψ(p)) − data` and its norm.
pub fn residual(ev: &mut dyn Evaluator, data: &[f64], p: &[f64]) -> Result<(Vec<f64>, f64)> {
    let psi = ev.transfer(p)?;
    let mut r = stack(&psi);
    if r.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: r.len(),
        });
    }
    for (ri, di) in r.iter_mut().zip(data) {
        *ri -= di;
    }
    let n = norm2(&r);
    Ok((r, n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionSettings {
    /// Initial radius as a fraction of `‖D p0‖` (`D` the column scaling).
    pub initial_radius: f64,
    pub max_radius: f64,
    pub max_iter: usize,
    pub max_fevals: Option<usize>,
    /// Stop once `‖res‖ ≤ noise_factor · noise_norm`.
    pub noise_factor: f64,
    /// Relative step-size tolerance.
    pub step_tol: f64,
    /// Tolerance on `‖Jᵀ r‖` relative to its initial value.
    pub grad_tol: f64,
}

impl Default for TrustRegionSettings {
    fn default() -> Self {
        Self {
            initial_radius: 1.0,
            max_radius: 100.0,
            max_iter: 300,
            max_fevals: None,
            noise_factor: 1.1,
            step_tol: 1e-10,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    NoiseLevel,
    StepTolerance,
    GradientTolerance,
    MaxIterations,
    MaxEvaluations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Residual norm at the current iterate after this step.
    pub residual_norm: f64,
    /// Trial residual norm (equal to `residual_norm` on acceptance).
    pub trial_norm: f64,
    pub radius: f64,
    pub step_norm: f64,
    pub accepted: bool,
    pub fevals: usize,
    pub jevals: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub p: Vec<f64>,
    pub residual_norm: f64,
    pub stop: StopReason,
    pub trace: OptTrace,
    pub counts: EvalCounts,
}

impl Outcome {
    pub fn reached_noise_level(&self) -> bool {
        self.stop == StopReason::NoiseLevel
    }
}

const DIVERGENCE_FACTOR: f64 = 1e6;

/// Trust-region Gauss-Newton with a dogleg step.
///
/// Each iteration proposes a step inside the trust region from the
/// Gauss-Newton model, evaluates the residual there and accepts it when the
/// actual reduction is a positive fraction of the predicted one. The region
/// is measured in the norm `‖D s‖` with `D` the running maximum of the
/// Jacobian column norms. Dilations are clamped to stay admissible.
pub fn solve(
    problem: &InverseProblem,
    fp: &ForwardProblem,
    ev: &mut dyn Evaluator,
    settings: &TrustRegionSettings,
) -> Result<Outcome> {
    let pals = fp.pals();
    let mut p = problem.p0.clone();
    pals.clamp_dilations(&mut p);
    let target = settings.noise_factor * problem.noise_norm;
    let (mut r, mut f) = residual(ev, &problem.data, &p)?;
    let initial = f;
    let mut radius = 0.0;
    let mut trace = OptTrace::default();
    let row = |it, f, t, radius, s, acc, c: EvalCounts| TraceRow {
        iteration: it,
        residual_norm: f,
        trial_norm: t,
        radius,
        step_norm: s,
        accepted: acc,
        fevals: c.fevals,
        jevals: c.jevals,
    };
    trace.rows.push(row(0, f, f, radius, 0.0, true, ev.counts()));
    let finish = |p, f, stop, trace, ev: &dyn Evaluator| Outcome {
        p,
        residual_norm: f,
        stop,
        trace,
        counts: ev.counts(),
    };
    if f <= target {
        return Ok(finish(p, f, StopReason::NoiseLevel, trace, ev));
    }
    let mut jac = ev.jacobian(&p)?;
    let mut scale = vec![0.0; p.len()];
    update_scaling(&mut scale, &jac);
    let dp = norm2(&scaled(&scale, &p));
    radius = settings.initial_radius * if dp > 0.0 { dp } else { 1.0 };
    let mut g0 = None;

    for it in 1..=settings.max_iter {
        let g = jac.tr_mul_vec(&r);
        let gn = norm2(&g);
        let g_ref = *g0.get_or_insert(gn);
        if gn <= settings.grad_tol * g_ref || gn == 0.0 {
            return Ok(finish(p, f, StopReason::GradientTolerance, trace, ev));
        }
        let jhat = Mat::from_fn(jac.nrows(), jac.ncols(), |i, k| jac[(i, k)] / scale[k]);
        let ghat: Vec<f64> = g.iter().zip(&scale).map(|(a, d)| a / d).collect();
        let step: Vec<f64> = dogleg(&jhat, &ghat, radius).iter().zip(&scale).map(|(a, d)| a / d).collect();
        let mut trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
        pals.clamp_dilations(&mut trial);
        let s: Vec<f64> = trial.iter().zip(&p).map(|(a, b)| a - b).collect();
        let s_norm = norm2(&scaled(&scale, &s));
        let js = jac.mul_vec(&s);
        // ½‖r‖² − ½‖r + J s‖²
        let pred = -(dot(&r, &js) + 0.5 * dot(&js, &js));
        let (r_t, f_t) = residual(ev, &problem.data, &trial)?;
        if !(f_t <= DIVERGENCE_FACTOR * initial) {
            return Err(Error::Diverged {
                residual: f_t,
                limit: DIVERGENCE_FACTOR * initial,
            });
        }
        let actual = 0.5 * (f * f - f_t * f_t);
        let rho = if pred > 0.0 { actual / pred } else { -1.0 };
        let accepted = rho > 1e-4 && f_t < f;
        if rho < 0.25 {
            radius = 0.25 * radius.min(s_norm.max(f64::MIN_POSITIVE));
        } else if rho > 0.75 {
            radius = (2.0 * radius).min(settings.max_radius);
        }
        if accepted {
            p = trial;
            r = r_t;
            f = f_t;
        }
        trace.rows.push(row(it, f, f_t, radius, s_norm, accepted, ev.counts()));
        if accepted && f <= target {
            return Ok(finish(p, f, StopReason::NoiseLevel, trace, ev));
        }
        let pn = norm2(&scaled(&scale, &p));
        if s_norm <= settings.step_tol * (1.0 + pn) || radius <= settings.step_tol * (1.0 + pn) {
            return Ok(finish(p, f, StopReason::StepTolerance, trace, ev));
        }
        if let Some(cap) = settings.max_fevals {
            if ev.counts().fevals >= cap {
                return Ok(finish(p, f, StopReason::MaxEvaluations, trace, ev));
            }
        }
        if accepted {
            jac = ev.jacobian(&p)?;
            update_scaling(&mut scale, &jac);
        }
    }
    Ok(finish(p, f, StopReason::MaxIterations, trace, ev))
}

/// `D_k = max(D_k, ‖J(:, k)‖)`; parameters the data never saw keep unit
/// scale.
fn update_scaling(scale: &mut [f64], jac: &Mat) {
    for (k, d) in scale.iter_mut().enumerate() {
        let c = norm2(jac.col(k));
        *d = d.max(c);
    }
    for d in scale.iter_mut() {
        if *d == 0.0 {
            *d = 1.0;
        }
    }
}

fn scaled(scale: &[f64], x: &[f64]) -> Vec<f64> {
    x.iter().zip(scale).map(|(a, d)| a * d).collect()
}

/// Dogleg step for the model `½‖r + J s‖²` with gradient `g = Jᵀ r`.
fn dogleg(jac: &Mat, g: &[f64], radius: f64) -> Vec<f64> {
    let gn = gauss_newton_step(jac, g);
    if norm2(&gn) <= radius {
        return gn;
    }
    let jg = jac.mul_vec(g);
    let gg = dot(g, g);
    let jgjg = dot(&jg, &jg);
    let gnorm = sqrt(gg);
    if jgjg <= 0.0 {
        return g.iter().map(|x| -radius * x / gnorm).collect();
    }
    let tc = gg / jgjg;
    let cauchy: Vec<f64> = g.iter().map(|x| -tc * x).collect();
    let cn = norm2(&cauchy);
    if cn >= radius {
        return cauchy.iter().map(|x| x * radius / cn).collect();
    }
    // cauchy + τ (gn − cauchy) on the boundary
    let d: Vec<f64> = gn.iter().zip(&cauchy).map(|(a, b)| a - b).collect();
    let a = dot(&d, &d);
    let b = 2.0 * dot(&cauchy, &d);
    let c = cn * cn - radius * radius;
    let tau = (-b + sqrt((b * b - 4.0 * a * c).max(0.0))) / (2.0 * a);
    cauchy.iter().zip(&d).map(|(x, y)| x + tau * y).collect()
}

/// Minimum-norm solution of `JᵀJ s = −g` through the eigen-decomposition of
/// `JᵀJ`, ignoring eigenvalues below `1e-12 λ_max`.
fn gauss_newton_step(jac: &Mat, g: &[f64]) -> Vec<f64> {
    let jtj = jac.tr_mul(jac);
    let (vals, vecs) = symmetric_eigen(&jtj);
    let lmax = vals.last().copied().unwrap_or(0.0);
    let mut s = vec![0.0; g.len()];
    for (i, &l) in vals.iter().enumerate() {
        if l > 1e-12 * lmax && l > 0.0 {
            let c = -dot(vecs.col(i), g) / l;
            for (sk, vk) in s.iter_mut().zip(vecs.col(i)) {
                *sk += c * vk;
            }
        }
    }
    s
}
