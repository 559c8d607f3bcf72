//! Subcommands: run a pipeline step and write its outputs into `out`.
//! Each returns a short human-readable summary.

use std::fmt::Write as _;
use std::path::Path;

use romdot_core::inversion::{Outcome, StopReason};
use romdot_core::pals::ParamKind;
use romdot_core::rom::BatchRunner;

use crate::experiment::{
    compare_recycling, held_out_coefficients, invert, offline, simulate, Inversion, Measurements, Mode, Setup,
    OFFLINE_BASIS,
};
use crate::formats::{read_basis, sci, write_basis, write_csv, write_pgm};
use crate::AppError;

pub const BASIS_FILE: &str = "basis.romb";

fn ensure_dir(out: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))
}

fn image(setup: &Setup, out: &Path, name: &str, values: &[f64]) -> Result<(), AppError> {
    let g = setup.fp.grid();
    let p = &setup.cfg.pals;
    write_pgm(&out.join(name), g.nx(), g.ny(), values, p.mu_out, p.mu_in)
}

fn measurement_rows(ns: usize, nd: usize, values: &[f64]) -> Vec<Vec<String>> {
    (0..ns)
        .flat_map(|s| (0..nd).map(move |d| (s, d)))
        .map(|(s, d)| vec![s.to_string(), d.to_string(), sci(values[s * nd + d])])
        .collect()
}

pub fn cmd_simulate(setup: &Setup, out: &Path, runner: &dyn BatchRunner) -> Result<String, AppError> {
    ensure_dir(out)?;
    let m = simulate(setup, runner)?;
    image(setup, out, "truth.pgm", &setup.truth_image())?;
    let (ns, nd) = (setup.fp.n_src(), setup.fp.n_det());
    let clean = romdot_core::rom::stack(&m.clean);
    let header = ["source", "detector", "value"];
    write_csv(&out.join("clean.csv"), &header, &measurement_rows(ns, nd, &clean))?;
    write_csv(&out.join("noisy.csv"), &header, &measurement_rows(ns, nd, &m.noisy))?;
    let noise_path = out.join("noise.txt");
    let text = format!(
        "noise_norm={}\nnoise_fraction={}\nseed={}\n",
        sci(m.noise_norm),
        setup.cfg.run.noise,
        setup.cfg.run.seed
    );
    std::fs::write(&noise_path, text).map_err(|e| AppError::io(&noise_path, e))?;
    Ok(format!(
        "simulated {} measurements, ‖data‖ = {}, noise norm = {}",
        clean.len(),
        sci(romdot_core::linalg::norm2(&clean)),
        sci(m.noise_norm)
    ))
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::NoiseLevel => "noise-level",
        StopReason::StepTolerance => "step-tolerance",
        StopReason::GradientTolerance => "gradient-tolerance",
        StopReason::MaxIterations => "max-iterations",
        StopReason::MaxEvaluations => "max-evaluations",
    }
}

fn write_trace(path: &Path, outcome: &Outcome) -> Result<(), AppError> {
    let rows: Vec<Vec<String>> = outcome
        .trace
        .rows
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                sci(r.residual_norm),
                sci(r.trial_norm),
                sci(r.radius),
                sci(r.step_norm),
                u8::from(r.accepted).to_string(),
                r.fevals.to_string(),
                r.jevals.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["iteration", "residual_norm", "trial_norm", "radius", "step_norm", "accepted", "fevals", "jevals"],
        &rows,
    )
}

fn write_params(setup: &Setup, path: &Path, p: &[f64]) -> Result<(), AppError> {
    let pals = setup.fp.pals();
    let rows = p
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (bump, kind) = pals.param_kind(k)?;
            let kind = match kind {
                ParamKind::Weight => "weight",
                ParamKind::Dilation => "dilation",
                ParamKind::CenterX => "center_x",
                ParamKind::CenterY => "center_y",
            };
            Ok(vec![k.to_string(), bump.to_string(), kind.to_string(), sci(*v)])
        })
        .collect::<Result<Vec<_>, AppError>>()?;
    write_csv(path, &["index", "bump", "kind", "value"], &rows)
}

/// Writes reconstruction image, parameters, trace, and in hybrid mode the
/// build log and final basis.
pub fn write_inversion(setup: &Setup, out: &Path, data: &Measurements, inv: &Inversion) -> Result<String, AppError> {
    let tag = inv.mode.name();
    let o = &inv.outcome;
    image(setup, out, &format!("reconstruction_{tag}.pgm"), &setup.reconstruction_image(&o.p)?)?;
    write_params(setup, &out.join(format!("params_{tag}.csv")), &o.p)?;
    write_trace(&out.join(format!("trace_{tag}.csv")), o)?;
    let c = o.counts;
    let mut summary = String::new();
    let _ = writeln!(summary, "mode={tag}");
    let _ = writeln!(summary, "stop={}", stop_name(o.stop));
    let _ = writeln!(summary, "residual_norm={}", sci(o.residual_norm));
    let _ = writeln!(summary, "noise_norm={}", sci(data.noise_norm));
    let _ = writeln!(summary, "iterations={}", o.trace.rows.len().saturating_sub(1));
    let _ = writeln!(summary, "fevals={}", c.fevals);
    let _ = writeln!(summary, "jevals={}", c.jevals);
    let _ = writeln!(summary, "full_solves={}", c.full_solves);
    if let Some(h) = &inv.hybrid {
        let rows: Vec<Vec<String>> = h
            .log
            .entries
            .iter()
            .map(|e| {
                vec![
                    e.system.to_string(),
                    e.rhs.to_string(),
                    sci(e.initial_rel_residual),
                    e.iterations.to_string(),
                    u8::from(e.appended).to_string(),
                    sci(e.final_rel_residual),
                ]
            })
            .collect();
        write_csv(
            &out.join("buildlog.csv"),
            &["system", "rhs", "initial_rel_residual", "iterations", "appended", "final_rel_residual"],
            &rows,
        )?;
        write_basis(&out.join(BASIS_FILE), &h.basis, &h.kinds)?;
        let _ = writeln!(summary, "basis_order={}", h.basis.ncols());
        let _ = writeln!(summary, "systems={}", h.basis_parameters.len() - 1);
        let _ = writeln!(summary, "appends={}", h.log.appends());
        let _ = writeln!(summary, "zero_iteration_rhs={}", h.log.entries.iter().filter(|e| e.iterations == 0).count());
        let _ = writeln!(summary, "offline_cached={}", h.offline_cached);
    }
    let path = out.join(format!("summary_{tag}.txt"));
    std::fs::write(&path, &summary).map_err(|e| AppError::io(&path, e))?;
    Ok(summary)
}

pub fn cmd_invert(setup: &Setup, mode: Mode, out: &Path, runner: &dyn BatchRunner) -> Result<String, AppError> {
    ensure_dir(out)?;
    let data = simulate(setup, runner)?;
    let inv = invert(setup, &data, mode, runner, Some(out))?;
    write_inversion(setup, out, &data, &inv)
}

pub fn cmd_compare_recycling(setup: &Setup, out: &Path, runner: &dyn BatchRunner) -> Result<String, AppError> {
    ensure_dir(out)?;
    let data = simulate(setup, runner)?;
    let cmp = compare_recycling(setup, &data, Some(out))?;
    let keep = |rhs: usize| setup.cfg.compare_rhs.as_ref().is_none_or(|l| l.contains(&rhs));
    let mut rows: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .filter(|r| keep(r.rhs))
        .map(|r| {
            vec![
                r.system.to_string(),
                r.rhs.to_string(),
                r.its_ours.to_string(),
                sci(r.init_relres_ours),
                r.its_baseline.to_string(),
                sci(r.init_relres_baseline),
            ]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        String::new(),
        cmp.total_ours.to_string(),
        String::new(),
        cmp.total_baseline.to_string(),
        String::new(),
    ]);
    write_csv(
        &out.join("compare_recycling.csv"),
        &["system", "rhs", "its_ours", "init_relres_ours", "its_baseline", "init_relres_baseline"],
        &rows,
    )?;
    Ok(format!(
        "systems 1-2: {} iterations with the global basis, {} with per-RHS recycling (ratio {:.3})",
        cmp.total_ours,
        cmp.total_baseline,
        cmp.total_ours as f64 / cmp.total_baseline.max(1) as f64
    ))
}

pub fn cmd_offline(setup: &Setup, out: &Path) -> Result<String, AppError> {
    ensure_dir(out)?;
    let (init, cached) = offline(setup, Some(out))?;
    Ok(format!(
        "{} {} eigenvectors and {} initial solutions in {}",
        if cached { "reused" } else { "computed" },
        init.eigen.vectors.ncols(),
        init.x0.ncols(),
        out.join(OFFLINE_BASIS).display()
    ))
}

/// Coefficients of held-out solutions in the basis stored at `basis_path`
/// (default: the hybrid basis in `out`, rebuilt if missing).
pub fn cmd_coeffs(
    setup: &Setup,
    out: &Path,
    basis_path: Option<&Path>,
    system: Option<usize>,
    runner: &dyn BatchRunner,
) -> Result<String, AppError> {
    ensure_dir(out)?;
    let system = system.unwrap_or(setup.cfg.coeffs_system);
    let data = simulate(setup, runner)?;
    let inv = invert(setup, &data, Mode::RomHybrid, runner, Some(out))?;
    let basis = match basis_path {
        Some(p) => read_basis(p)?.v,
        None => inv.hybrid.as_ref().expect("hybrid run").basis.clone(),
    };
    let c = held_out_coefficients(setup, &inv, &basis, system, runner)?;
    let m = &c.coefficients;
    let header: Vec<String> = (0..m.nrows()).map(|i| format!("c{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| sci(m[(i, j)].abs())).collect())
        .collect();
    write_csv(&out.join(format!("coeffs_system{system}.csv")), &header, &rows)?;
    Ok(format!(
        "coefficients of {} held-out solutions (system {system}) in a basis of {} columns",
        m.ncols(),
        m.nrows()
    ))
}
