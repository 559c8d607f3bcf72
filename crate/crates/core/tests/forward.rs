use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use romdot_core::discretization::GridConfig;
use romdot_core::linalg::{norm2, Mat};
use romdot_core::pals::PalsModel;
use romdot_core::rom::{fom_jacobian, fom_solve, fom_transfer, reduce, FomSettings, ForwardProblem, Sequential};

fn na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.nrows(), m.ncols(), m.as_slice())
}

// unit-width slab with square cells
fn problem(nx: usize, ny: usize, k: usize) -> ForwardProblem {
    let cfg = GridConfig {
        y_range: (0.0, (ny - 1) as f64 / (nx - 1) as f64),
        ..GridConfig::unit_square(nx, ny)
    };
    ForwardProblem::new(cfg, k, k, PalsModel::new(4, 10.0, 1.0)).unwrap()
}

fn random_params(fp: &ForwardProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = fp.pals().n_bumps;
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(2.5..4.0)).collect();
    let c: Vec<[f64; 2]> = (0..m)
        .map(|_| [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)])
        .collect();
    fp.pals().pack(&w, &b, &c)
}

fn transfer(fp: &ForwardProblem, p: &[f64]) -> Mat {
    let mu = fp.absorption(p).unwrap();
    fom_transfer(fp, &mu, &FomSettings::default(), &Sequential).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schur_form_matches_full_block_system(
        nx in 5usize..12,
        ny in 5usize..12,
        seed in any::<u64>(),
    ) {
        let k = (nx - 2).min(3);
        let fp = problem(nx, ny, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phys: Vec<f64> = (0..fp.n_interior()).map(|_| rng.random_range(0.0..30.0)).collect();
        let mu = fp.scale_absorption(&phys);
        let (b, c) = fp.layout().full_b_c(fp.grid());
        let a = na(&fp.blocks().full_block_matrix(&mu).unwrap());
        let full = na(&c).transpose() * a.lu().solve(&na(&b)).unwrap();
        let (psi, _) = fom_transfer(&fp, &mu, &FomSettings::default(), &Sequential).unwrap();
        let psi = na(&psi);
        prop_assert!((&full - &psi).norm() <= 1e-10 * full.norm());
    }

    // Ã(μ) is an M-matrix, so Ψ is positive and decreases with μ.
    #[test]
    fn transfer_is_positive_and_monotone_in_absorption(seed in any::<u64>()) {
        let fp = problem(11, 11, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phys: Vec<f64> = (0..fp.n_interior()).map(|_| rng.random_range(0.0..20.0)).collect();
        let more: Vec<f64> = phys.iter().map(|m| m + rng.random_range(0.0..5.0)).collect();
        let s = FomSettings::default();
        let (lo, _) = fom_transfer(&fp, &fp.scale_absorption(&phys), &s, &Sequential).unwrap();
        let (hi, _) = fom_transfer(&fp, &fp.scale_absorption(&more), &s, &Sequential).unwrap();
        for (a, b) in lo.as_slice().iter().zip(hi.as_slice()) {
            prop_assert!(*b > 0.0);
            prop_assert!(b <= a);
        }
    }
}

#[test]
fn jacobian_matches_directional_differences() {
    let fp = problem(13, 13, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = FomSettings::default();
    for _ in 0..3 {
        let p = random_params(&fp, &mut rng);
        let mu = fp.absorption(&p).unwrap();
        let (_, x) = fom_transfer(&fp, &mu, &s, &Sequential).unwrap();
        let jac = fom_jacobian(&fp, &p, &x, &s, &Sequential).unwrap();
        let dir: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = 1e-6;
        let shift = |t: f64| p.iter().zip(&dir).map(|(a, d)| a + t * d).collect::<Vec<_>>();
        let fd: Vec<f64> = transfer(&fp, &shift(h))
            .sub(&transfer(&fp, &shift(-h)))
            .as_slice()
            .iter()
            .map(|v| v / (2.0 * h))
            .collect();
        let jd = jac.mul_vec(&dir);
        let err: Vec<f64> = jd.iter().zip(&fd).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) <= 1e-5 * norm2(&fd), "{:e}", norm2(&err) / norm2(&fd));
    }
}

#[test]
fn reduced_jacobian_matches_reduced_differences() {
    let fp = problem(13, 13, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = FomSettings::default();
    // basis: forward and adjoint solutions at two parameter vectors
    let mut v = Mat::with_rows(fp.n_interior());
    for _ in 0..2 {
        let mu = fp.absorption(&random_params(&fp, &mut rng)).unwrap();
        let cols: Vec<_> = fp.layout().b_tilde.iter().chain(&fp.layout().c_tilde).copied().collect();
        let x = fom_solve(&fp, &mu, &cols, &s, &Sequential).unwrap();
        for c in x.cols() {
            v.push_col(c).unwrap();
        }
    }
    let rm = reduce(&v, &fp).unwrap();
    let p = random_params(&fp, &mut rng);
    let sol = rm.solve(&fp.absorption(&p).unwrap()).unwrap();
    let jac = rm.jacobian(&sol, &fp.operator_derivatives(&p).unwrap());
    let psi = |q: &[f64]| rm.transfer(&fp.absorption(q).unwrap()).unwrap();
    let h = 1e-6;
    for k in [0, 3, 5, 8, 13] {
        let (mut pp, mut pm) = (p.clone(), p.clone());
        pp[k] += h;
        pm[k] -= h;
        let fd: Vec<f64> = psi(&pp).sub(&psi(&pm)).as_slice().iter().map(|v| v / (2.0 * h)).collect();
        let err: Vec<f64> = jac.col(k).iter().zip(&fd).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) <= 1e-5 * norm2(&fd).max(1e-12), "column {k}");
    }
}

#[test]
fn reduced_model_interpolates_its_snapshots() {
    let fp = problem(15, 15, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = random_params(&fp, &mut rng);
    let mu = fp.absorption(&p).unwrap();
    let cols: Vec<_> = fp.layout().b_tilde.iter().chain(&fp.layout().c_tilde).copied().collect();
    let x = fom_solve(&fp, &mu, &cols, &FomSettings::default(), &Sequential).unwrap();
    let rm = reduce(&x, &fp).unwrap();
    let full = transfer(&fp, &p);
    let red = rm.transfer(&mu).unwrap();
    for (a, b) in full.as_slice().iter().zip(red.as_slice()) {
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }
}
