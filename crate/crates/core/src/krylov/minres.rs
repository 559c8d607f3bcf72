use alloc::vec;
use alloc::vec::Vec;

use super::{is_finite, LinearOperator, RecycleSpace, SolveReport, SolverSettings};
use crate::linalg::{axpy, dot, norm2, sqrt};
use crate::{Error, Result};

/// Unpreconditioned MINRES for symmetric (possibly indefinite) `A x = b`.
///
/// Short recurrences only: three Lanczos vectors and three search directions
/// are kept, and the QR factorization of the tridiagonal is advanced by one
/// Givens rotation per step. Stops when `‖b − A x‖ ≤ tol ‖b‖` (checked
/// explicitly once the recurrence estimate drops below the target), at the
/// iteration cap, or on stagnation.
pub fn minres(op: &dyn LinearOperator, b: &[f64], settings: &SolverSettings) -> Result<(Vec<f64>, SolveReport)> {
    if b.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: b.len(),
        });
    }
    let bnorm = norm2(b);
    minres_core(op, b, bnorm, settings, None)
}

/// Output of [`recycled_minres`].
#[derive(Debug, Clone)]
pub struct RecycledSolution {
    /// `g = y_m + U Kᵀ(rhs − A y_m)`, the minimizer of `‖rhs − A g‖` over
    /// `Range([U, V_m])`.
    pub g: Vec<f64>,
    /// The new-direction component `y_m = V_m y`.
    pub y: Vec<f64>,
    /// `A y_m`.
    pub ay: Vec<f64>,
    pub report: SolveReport,
}

/// MINRES deflated by a recycle space.
///
/// Runs the Lanczos recurrence with `(I − K Kᵀ) A` from `rhs/‖rhs‖`, builds
/// `y_m` by short recurrences and finishes with `z = Kᵀ(rhs − A y_m)`, so
/// that `g = y_m + U z`. For `rhs ⊥ Range(K)` this is `z = −Kᵀ A y_m`. Convergence is measured as `‖rhs − A g‖ ≤ tol · ref_norm`
/// where `ref_norm` defaults to `‖rhs‖`.
pub fn recycled_minres(
    op: &dyn LinearOperator,
    rs: &RecycleSpace,
    rhs: &[f64],
    settings: &SolverSettings,
    ref_norm: Option<f64>,
) -> Result<RecycledSolution> {
    let n = op.dim();
    if rhs.len() != n || rs.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut r = rhs.to_vec();
    rs.project_out(&mut r);
    let reference = ref_norm.unwrap_or_else(|| norm2(rhs));
    let (y, mut report) = minres_core(op, &r, reference, settings, Some(rs))?;
    let ay = op.apply_vec(&y);
    // z = Kᵀ(rhs − A y_m), so that rhs − A g = (I − K Kᵀ)(rhs − A y_m)
    let kc = rs.coefficients(rhs);
    let z: Vec<f64> = kc.iter().zip(rs.coefficients(&ay)).map(|(c, a)| c - a).collect();
    let mut g = y.clone();
    for (j, zj) in z.iter().enumerate() {
        axpy(*zj, rs.u().col(j), &mut g);
    }
    let mut res: Vec<f64> = rhs.iter().zip(&ay).map(|(b, a)| b - a).collect();
    rs.project_out(&mut res);
    report.final_rel_residual = if reference > 0.0 { norm2(&res) / reference } else { 0.0 };
    report.correction_norm = norm2(&g);
    Ok(RecycledSolution { g, y, ay, report })
}

fn minres_core(
    op: &dyn LinearOperator,
    b: &[f64],
    reference: f64,
    settings: &SolverSettings,
    projector: Option<&RecycleSpace>,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = op.dim();
    let mut x = vec![0.0; n];
    let beta1 = norm2(b);
    if !beta1.is_finite() {
        return Err(Error::Breakdown("minres"));
    }
    let reference = if reference > 0.0 { reference } else { beta1 };
    let mut report = SolveReport::default();
    if beta1 == 0.0 {
        report.converged = true;
        report.rel_residual_history.push(0.0);
        return Ok((x, report));
    }
    let target = settings.tol * reference;
    report.rel_residual_history.push(beta1 / reference);
    if beta1 <= target {
        report.converged = true;
        report.final_rel_residual = beta1 / reference;
        return Ok((x, report));
    }

    let true_residual = |x: &[f64]| -> f64 {
        let mut r = op.apply_vec(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        if let Some(rs) = projector {
            rs.project_out(&mut r);
        }
        norm2(&r)
    };

    let maxit = settings.cap(n);
    let mut v_prev = vec![0.0; n];
    let mut v: Vec<f64> = b.iter().map(|bi| bi / beta1).collect();
    let mut p = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2;
    let mut beta = 0.0; // β_k couples v_prev and v
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let (mut dbar, mut epsln) = (0.0f64, 0.0f64);
    let mut phibar = beta1;
    let mut next_check = 0usize;
    let mut last_true = f64::INFINITY;

    for k in 1..=maxit {
        op.apply(&v, &mut p);
        let alpha = dot(&v, &p);
        for i in 0..n {
            p[i] -= alpha * v[i] + beta * v_prev[i];
        }
        if let Some(rs) = projector {
            rs.project_out(&mut p);
        }
        let beta_next = norm2(&p);
        if !alpha.is_finite() || !beta_next.is_finite() {
            return Err(Error::Breakdown("minres"));
        }

        let oldeps = epsln;
        let delta = cs * dbar + sn * alpha;
        let gbar = sn * dbar - cs * alpha;
        epsln = sn * beta_next;
        dbar = -cs * beta_next;
        let gamma = sqrt(gbar * gbar + beta_next * beta_next).max(f64::EPSILON * beta1.max(1e-300));
        cs = gbar / gamma;
        sn = beta_next / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // w_k = (v_k − ε_k w_{k−2} − δ_k w_{k−1}) / γ_k
        w2 = core::mem::replace(&mut w1, core::mem::take(&mut w));
        w = (0..n).map(|i| (v[i] - oldeps * w2[i] - delta * w1[i]) / gamma).collect();
        axpy(phi, &w, &mut x);

        let est = phibar.abs();
        report.iterations = k;
        report.rel_residual_history.push(est / reference);

        // lucky breakdown: Krylov space is invariant, x is exact there
        let invariant = beta_next <= 1e-14 * beta1.max(alpha.abs());

        if est <= target || invariant {
            if k >= next_check {
                let tr = true_residual(&x);
                if !tr.is_finite() {
                    return Err(Error::Breakdown("minres"));
                }
                last_true = tr;
                if tr <= target {
                    report.converged = true;
                    break;
                }
                next_check = k + 5;
            }
            if invariant {
                break;
            }
        }

        let win = settings.stagnation_window;
        if win > 0 && k >= win {
            let then = report.rel_residual_history[k - win];
            if est / reference >= then * (1.0 - 1e-10) {
                break;
            }
        }

        v_prev = core::mem::replace(&mut v, p.iter().map(|pi| pi / beta_next).collect());
        beta = beta_next;
    }

    if !is_finite(&x) {
        return Err(Error::Breakdown("minres"));
    }
    report.final_rel_residual = if report.converged {
        last_true / reference
    } else {
        true_residual(&x) / reference
    };
    report.correction_norm = norm2(&x);
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Cholesky, Mat, SplitMix64};

    fn diag(d: &[f64]) -> Mat {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[test]
    fn identity_converges_in_one_step() {
        let a = Mat::identity(7);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let (x, rep) = minres(&a, &b, &SolverSettings::new(1e-12)).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn zero_rhs_is_immediate() {
        let a = Mat::identity(3);
        let (x, rep) = minres(&a, &[0.0; 3], &SolverSettings::new(1e-8)).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn diagonal_system_matches_dense() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        let a = diag(&d);
        let (x, rep) = minres(&a, &[1.0; 10], &SolverSettings::new(1e-13)).unwrap();
        assert!(rep.converged);
        for (xi, di) in x.iter().zip(&d) {
            assert!((xi - 1.0 / di).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_diagonal() {
        let a = diag(&[-2.0, -1.0, 1.0, 2.0]);
        let b = [1.0, 1.0, 1.0, 1.0];
        let (x, rep) = minres(&a, &b, &SolverSettings::new(1e-12)).unwrap();
        assert!(rep.converged);
        let e = [-0.5, -1.0, 1.0, 0.5];
        assert!(x.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn history_is_nonincreasing() {
        let mut g = SplitMix64::new(5);
        let m = Mat::from_fn(40, 40, |_, _| g.next_signed());
        let mut a = m.tr_mul(&m);
        for i in 0..40 {
            a[(i, i)] += 0.01;
        }
        let b: Vec<f64> = (0..40).map(|_| g.next_signed()).collect();
        let (x, rep) = minres(&a, &b, &SolverSettings::new(1e-10)).unwrap();
        assert!(rep.rel_residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let exact = Cholesky::factor(&a).unwrap().solve(&b);
        let err: f64 = x.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(rep.converged, "{rep:?}");
        assert!(err / norm2(&exact) < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let d: Vec<f64> = (1..=50).map(|i| (i * i) as f64).collect();
        let a = diag(&d);
        let (_, rep) = minres(&a, &[1.0; 50], &SolverSettings::new(1e-14).with_max_iter(3)).unwrap();
        assert_eq!(rep.iterations, 3);
        assert!(!rep.converged);
    }

    #[test]
    fn recycled_zero_rhs() {
        let a = Mat::identity(5);
        let mut rs = RecycleSpace::new(5);
        rs.append(&a, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let sol = recycled_minres(&a, &rs, &[0.0; 5], &SolverSettings::new(1e-8), None).unwrap();
        assert_eq!(sol.report.iterations, 0);
        assert!(sol.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nan_operator_is_breakdown() {
        let a = diag(&[1.0, f64::NAN, 2.0]);
        assert!(matches!(
            minres(&a, &[1.0, 1.0, 1.0], &SolverSettings::new(1e-8)),
            Err(Error::Breakdown(_))
        ));
    }

    fn spd(n: usize, seed: u64, shift: f64) -> Mat {
        let mut g = SplitMix64::new(seed);
        let m = Mat::from_fn(n, n, |_, _| g.next_signed());
        let mut a = m.tr_mul(&m);
        for i in 0..n {
            a[(i, i)] += shift;
        }
        a
    }

    #[test]
    fn recycled_solution_matches_augmented_least_squares() {
        let n = 60;
        let a = spd(n, 11, 0.5);
        let mut g = SplitMix64::new(12);
        let mut rs = RecycleSpace::new(n);
        for _ in 0..5 {
            let v: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
            rs.append(&a, &v).unwrap();
        }
        let b: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
        let settings = SolverSettings::new(1e-14).with_max_iter(8);
        let sol = recycled_minres(&a, &rs, &b, &settings, None).unwrap();
        let m = sol.report.iterations;

        // oracle: min ‖b − A w‖ over Range([U, Krylov_m(P A, P b)]) via normal equations
        let mut basis = rs.u().clone();
        let mut v = b.clone();
        rs.project_out(&mut v);
        for _ in 0..m {
            basis.push_col(&v).unwrap();
            let mut w = a.apply_vec(&v);
            rs.project_out(&mut w);
            v = w;
        }
        let (q, _) = crate::linalg::qr_thin(&basis).unwrap();
        let aq = a.mul(&q);
        let normal = aq.tr_mul(&aq);
        let c = Cholesky::factor(&normal).unwrap().solve(&aq.tr_mul_vec(&b));
        let w = q.mul_vec(&c);
        let best = super::super::residual_norm(&a, &b, &w);
        let ours = super::super::residual_norm(&a, &b, &sol.g);
        assert!((ours - best).abs() <= 1e-8 * norm2(&b), "{ours} vs {best}");
        assert!((sol.report.final_rel_residual * norm2(&b) - ours).abs() < 1e-10);
    }

    #[test]
    fn deflation_reduces_iterations() {
        let n = 150;
        let mut d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        for v in d.iter_mut().take(6) {
            *v *= 1e-3;
        }
        let a = diag(&d);
        let b = vec![1.0; n];
        let s = SolverSettings::new(1e-8);
        let (_, plain) = minres(&a, &b, &s).unwrap();
        let mut rs = RecycleSpace::new(n);
        for i in 0..6 {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            rs.append(&a, &e).unwrap();
        }
        let sol = recycled_minres(&a, &rs, &b, &s, None).unwrap();
        assert!(sol.report.converged);
        assert!(sol.report.iterations < plain.iterations, "{} vs {}", sol.report.iterations, plain.iterations);
        assert!(sol.report.final_rel_residual <= 1e-8);
    }

    #[test]
    fn projected_operator_is_symmetric_on_complement() {
        let n = 40;
        let a = spd(n, 21, 1.0);
        let mut g = SplitMix64::new(22);
        let mut rs = RecycleSpace::new(n);
        for _ in 0..4 {
            let v: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
            rs.append(&a, &v).unwrap();
        }
        let pa = |x: &[f64]| {
            let mut y = a.apply_vec(x);
            rs.project_out(&mut y);
            y
        };
        for _ in 0..10 {
            let mut x: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
            let mut y: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
            rs.project_out(&mut x);
            rs.project_out(&mut y);
            let lhs = dot(&x, &pa(&y));
            let rhs = dot(&pa(&x), &y);
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn new_directions_stay_orthogonal_to_images() {
        let n = 80;
        let a = spd(n, 31, 0.2);
        let mut g = SplitMix64::new(32);
        let mut rs = RecycleSpace::new(n);
        for _ in 0..8 {
            let v: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
            rs.append(&a, &v).unwrap();
        }
        let b: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
        let sol = recycled_minres(&a, &rs, &b, &SolverSettings::new(1e-10), None).unwrap();
        // y_m lies in a Krylov space of P A started from P b, so A y_m has
        // its K-component cancelled by the U z term
        let ag = a.apply_vec(&sol.g);
        let r: Vec<f64> = b.iter().zip(&ag).map(|(x, y)| x - y).collect();
        assert!(rs.coefficients(&r).iter().all(|c| c.abs() <= 1e-10 * norm2(&b)));
        assert!(sol.report.rel_residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}
