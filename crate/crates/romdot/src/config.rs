//! Flat `section.key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors so that typos never silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::Path;

use romdot_core::discretization::GridConfig;
use romdot_core::krylov::{EigenSettings, SolverSettings};
use romdot_core::pals::PalsModel;
use romdot_core::rom::{FomMethod, FomSettings};
use romdot_core::inversion::TrustRegionSettings;

use crate::phantom::Phantom;
use crate::AppError;

#[derive(Debug, Clone, PartialEq)]
pub struct PalsConfig {
    pub bumps: usize,
    pub mu_in: f64,
    pub mu_out: f64,
    pub eps_heaviside: f64,
    pub eps_norm: f64,
    /// Initial weight of every bump.
    pub alpha0: f64,
    /// Initial dilation of every bump.
    pub beta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub noise: f64,
    pub k_star: usize,
    pub tol_basis: f64,
    pub k_eig: usize,
    pub eig_tol: f64,
    pub fom_method: FomMethod,
    pub solver_tol: f64,
    pub initial_radius: f64,
    pub max_radius: f64,
    pub max_iter: usize,
    pub max_fevals: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub n_src: usize,
    pub n_det: usize,
    pub pals: PalsConfig,
    pub run: RunConfig,
    pub phantom: Phantom,
    /// Right-hand sides listed by `compare-recycling` (totals always cover all).
    pub compare_rhs: Option<Vec<usize>>,
    /// Index of the held-out system used by `coeffs`.
    pub coeffs_system: usize,
}

const KEYS: &[&str] = &[
    "grid.nx",
    "grid.ny",
    "grid.x_min",
    "grid.x_max",
    "grid.y_min",
    "grid.y_max",
    "grid.diffusion",
    "grid.boundary_constant",
    "grid.light_speed",
    "layout.n_src",
    "layout.n_det",
    "pals.bumps",
    "pals.mu_in",
    "pals.mu_out",
    "pals.eps_heaviside",
    "pals.eps_norm",
    "pals.alpha0",
    "pals.beta0",
    "run.seed",
    "run.noise",
    "run.k_star",
    "run.tol_basis",
    "run.k_eig",
    "run.eig_tol",
    "run.fom_method",
    "run.solver_tol",
    "run.initial_radius",
    "run.max_radius",
    "run.max_iter",
    "run.max_fevals",
    "phantom.kind",
    "phantom.center",
    "phantom.radius",
    "phantom.inner_radius",
    "phantom.blobs",
    "compare.rhs",
    "coeffs.system",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, AppError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| AppError::Config(format!("line {line}: cannot parse {key} = {v:?}"))),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, AppError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, AppError> {
        self.parse(key)?
            .ok_or_else(|| AppError::Config(format!("missing required key {key}")))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, AppError> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|_| AppError::Config(format!("line {line}: {key} must be a comma-separated list of numbers")))
    }
}

fn tokenize(text: &str) -> Result<Entries, AppError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("line {line_no}: expected key = value")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(AppError::Config(format!("line {line_no}: unknown key {k:?}")));
        }
        if map.insert(k.to_string(), (line_no, v.to_string())).is_some() {
            return Err(AppError::Config(format!("line {line_no}: duplicate key {k:?}")));
        }
    }
    Ok(Entries { map })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        let e = tokenize(text)?;
        let grid = GridConfig {
            nx: e.require("grid.nx")?,
            ny: e.require("grid.ny")?,
            x_range: (e.get("grid.x_min", 0.0)?, e.get("grid.x_max", 1.0)?),
            y_range: (e.get("grid.y_min", 0.0)?, e.get("grid.y_max", 1.0)?),
            diffusion: e.get("grid.diffusion", 1.0)?,
            boundary_constant: e.get("grid.boundary_constant", 1.0)?,
            light_speed: e.get("grid.light_speed", 1.0)?,
        };
        let pals = PalsConfig {
            bumps: e.get("pals.bumps", 9)?,
            mu_in: e.require("pals.mu_in")?,
            mu_out: e.require("pals.mu_out")?,
            eps_heaviside: e.get("pals.eps_heaviside", 0.05)?,
            eps_norm: e.get("pals.eps_norm", 1e-3)?,
            alpha0: e.get("pals.alpha0", -1.0)?,
            beta0: e.get("pals.beta0", 3.0)?,
        };
        let fom_method = match e.get("run.fom_method", "direct".to_string())?.as_str() {
            "direct" => FomMethod::Direct,
            "minres" => FomMethod::Minres,
            other => return Err(AppError::Config(format!("run.fom_method must be direct or minres, got {other:?}"))),
        };
        let run = RunConfig {
            seed: e.require("run.seed")?,
            noise: e.get("run.noise", 0.01)?,
            k_star: e.get("run.k_star", 3)?,
            tol_basis: e.get("run.tol_basis", 1e-7)?,
            k_eig: e.get("run.k_eig", 10)?,
            eig_tol: e.get("run.eig_tol", 1e-8)?,
            fom_method,
            solver_tol: e.get("run.solver_tol", 1e-10)?,
            initial_radius: e.get("run.initial_radius", 1.0)?,
            max_radius: e.get("run.max_radius", 100.0)?,
            max_iter: e.get("run.max_iter", 300)?,
            max_fevals: e.parse("run.max_fevals")?,
        };
        let phantom = parse_phantom(&e)?;
        let compare_rhs = match e.raw("compare.rhs") {
            None | Some((_, "all")) => None,
            Some((line, v)) => Some(
                v.split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| AppError::Config(format!("line {line}: compare.rhs must be `all` or a list of indices")))?,
            ),
        };
        let cfg = Self {
            grid,
            n_src: e.require("layout.n_src")?,
            n_det: e.require("layout.n_det")?,
            pals,
            run,
            phantom,
            compare_rhs,
            coeffs_system: e.get("coeffs.system", 5)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), AppError> {
        let fail = |m: String| Err(AppError::Config(m));
        if self.grid.nx < 3 || self.grid.ny < 3 {
            return fail("grid must be at least 3×3".into());
        }
        let side = (self.pals.bumps as f64).sqrt().round() as usize;
        if self.pals.bumps == 0 || side * side != self.pals.bumps {
            return fail(format!("pals.bumps must be a positive square, got {}", self.pals.bumps));
        }
        if !(self.pals.mu_in > self.pals.mu_out && self.pals.mu_out >= 0.0) {
            return fail("need pals.mu_in > pals.mu_out ≥ 0".into());
        }
        if !(self.pals.beta0 > 0.0) {
            return fail("pals.beta0 must be positive".into());
        }
        if !(self.run.noise >= 0.0) {
            return fail("run.noise must be non-negative".into());
        }
        for (k, v) in [
            ("run.tol_basis", self.run.tol_basis),
            ("run.eig_tol", self.run.eig_tol),
            ("run.solver_tol", self.run.solver_tol),
            ("run.initial_radius", self.run.initial_radius),
            ("run.max_radius", self.run.max_radius),
        ] {
            if !(v > 0.0) {
                return fail(format!("{k} must be positive"));
            }
        }
        if self.run.k_eig == 0 {
            return fail("run.k_eig must be at least 1".into());
        }
        if let Some(rhs) = &self.compare_rhs {
            let n = self.n_src + self.n_det;
            if let Some(bad) = rhs.iter().find(|&&j| j >= n) {
                return fail(format!("compare.rhs index {bad} out of range 0..{n}"));
            }
        }
        if self.coeffs_system == 0 {
            return fail("coeffs.system must be at least 1 (system 0 is the reference)".into());
        }
        Ok(())
    }

    pub fn pals_model(&self) -> PalsModel {
        let mut m = PalsModel::new(self.pals.bumps, self.pals.mu_in, self.pals.mu_out);
        m.eps_heaviside = self.pals.eps_heaviside;
        m.eps_norm = self.pals.eps_norm;
        m
    }

    pub fn basis_settings(&self) -> SolverSettings {
        SolverSettings::new(self.run.tol_basis)
    }

    pub fn eigen_settings(&self) -> EigenSettings {
        EigenSettings::new(self.run.eig_tol)
    }

    pub fn fom_settings(&self) -> FomSettings {
        FomSettings {
            method: self.run.fom_method,
            solver: SolverSettings::new(self.run.solver_tol),
        }
    }

    pub fn trust_region(&self) -> TrustRegionSettings {
        TrustRegionSettings {
            initial_radius: self.run.initial_radius,
            max_radius: self.run.max_radius,
            max_iter: self.run.max_iter,
            max_fevals: self.run.max_fevals,
            ..TrustRegionSettings::default()
        }
    }

    /// Canonical description of everything the offline artifacts depend on.
    pub fn offline_fingerprint(&self) -> String {
        let g = &self.grid;
        let p = &self.pals;
        format!(
            "grid={}x{} x=[{:e},{:e}] y=[{:e},{:e}] d={:e} a={:e}\nlayout={}/{}\npals={} in={:e} out={:e} eh={:e} en={:e} a0={:e} b0={:e}\nk_eig={} eig_tol={:e} tol={:e}\n",
            g.nx, g.ny, g.x_range.0, g.x_range.1, g.y_range.0, g.y_range.1, g.diffusion, g.boundary_constant,
            self.n_src, self.n_det,
            p.bumps, p.mu_in, p.mu_out, p.eps_heaviside, p.eps_norm, p.alpha0, p.beta0,
            self.run.k_eig, self.run.eig_tol, self.run.tol_basis,
        )
    }
}

fn parse_phantom(e: &Entries) -> Result<Phantom, AppError> {
    let kind = e.get("phantom.kind", "disk".to_string())?;
    let center = |e: &Entries| -> Result<[f64; 2], AppError> {
        match e.list("phantom.center")? {
            None => Ok([0.5, 0.5]),
            Some(v) if v.len() == 2 => Ok([v[0], v[1]]),
            Some(_) => Err(AppError::Config("phantom.center needs two numbers".into())),
        }
    };
    let phantom = match kind.as_str() {
        "disk" => Phantom::Disk {
            center: center(e)?,
            radius: e.get("phantom.radius", 0.15)?,
        },
        "annulus" => Phantom::Annulus {
            center: center(e)?,
            inner: e.get("phantom.inner_radius", 0.1)?,
            outer: e.get("phantom.radius", 0.2)?,
        },
        "blobs" => {
            let (line, spec) = e
                .raw("phantom.blobs")
                .ok_or_else(|| AppError::Config("phantom.kind = blobs needs phantom.blobs = x,y,r;...".into()))?;
            let mut blobs = Vec::new();
            for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let v: Vec<f64> = part
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| AppError::Config(format!("line {line}: bad blob {part:?}")))?;
                if v.len() != 3 {
                    return Err(AppError::Config(format!("line {line}: blob {part:?} needs x,y,r")));
                }
                blobs.push(([v[0], v[1]], v[2]));
            }
            Phantom::Blobs(blobs)
        }
        other => return Err(AppError::Config(format!("unknown phantom.kind {other:?}"))),
    };
    phantom.validate().map_err(AppError::Config)?;
    Ok(phantom)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "grid.nx = 9\ngrid.ny = 9\nlayout.n_src = 2\nlayout.n_det = 2\npals.mu_in = 5\npals.mu_out = 1\nrun.seed = 7\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.grid.nx, 9);
        assert_eq!(c.run.k_star, 3);
        assert_eq!(c.run.tol_basis, 1e-7);
        assert_eq!(c.run.k_eig, 10);
        assert_eq!(c.run.noise, 0.01);
        assert_eq!(c.pals.bumps, 9);
        assert!(matches!(c.phantom, Phantom::Disk { .. }));
    }

    #[test]
    fn comments_and_spacing() {
        let text = format!("# desk\n\n{MINIMAL}  phantom.kind=annulus  \nphantom.center = 0.3, 0.6\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(
            c.phantom,
            Phantom::Annulus {
                center: [0.3, 0.6],
                inner: 0.1,
                outer: 0.2
            }
        );
    }

    #[test]
    fn rejects_unknown_duplicate_and_missing() {
        assert!(matches!(ExperimentConfig::parse(&format!("{MINIMAL}grid.nz = 3\n")), Err(AppError::Config(_))));
        assert!(matches!(ExperimentConfig::parse(&format!("{MINIMAL}grid.nx = 3\n")), Err(AppError::Config(_))));
        assert!(matches!(ExperimentConfig::parse(&MINIMAL.replace("run.seed = 7\n", "")), Err(AppError::Config(_))));
        assert!(matches!(ExperimentConfig::parse(&format!("{MINIMAL}pals.bumps = 8\n")), Err(AppError::Config(_))));
        assert!(matches!(ExperimentConfig::parse(&format!("{MINIMAL}run.noise = lots\n")), Err(AppError::Config(_))));
    }

    #[test]
    fn blobs_and_rhs_list() {
        let text = format!("{MINIMAL}phantom.kind = blobs\nphantom.blobs = 0.3,0.3,0.1; 0.7,0.6,0.05\ncompare.rhs = 0,3\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(c.phantom, Phantom::Blobs(vec![([0.3, 0.3], 0.1), ([0.7, 0.6], 0.05)]));
        assert_eq!(c.compare_rhs, Some(vec![0, 3]));
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}compare.rhs = 4\n")).is_err());
    }

    #[test]
    fn fingerprint_tracks_offline_inputs_only() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let b = ExperimentConfig::parse(&format!("{MINIMAL}run.initial_radius = 0.5\n")).unwrap();
        let c = ExperimentConfig::parse(&format!("{MINIMAL}pals.beta0 = 4\n")).unwrap();
        assert_eq!(a.offline_fingerprint(), b.offline_fingerprint());
        assert_ne!(a.offline_fingerprint(), c.offline_fingerprint());
    }
}
