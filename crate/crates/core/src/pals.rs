//! Parametric level-set absorption images.
//!
//! The level set is a weighted sum of compactly supported Wendland C2 bumps,
//!
//! ```text
//! φ(x) = Σ_j α_j ψ(‖β_j (x − χ_j)‖_ε),   ψ(r) = (1 − r)₊⁴ (4r + 1),
//! ‖v‖_ε = sqrt(‖v‖² + ε_n²)
//! ```
//!
//! and the absorption is `μ = μ_out + (μ_in − μ_out) H_ε(φ − c)` with the
//! arctangent Heaviside `H_ε(t) = ½ (1 + (2/π) atan(t/ε_h))`.
//!
//! Parameters are laid out as `(α_1..α_m, β_1..β_m, χ_1x, χ_1y, .., χ_mx, χ_my)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::sqrt;
use crate::{Error, Result};

/// Lower bound applied to dilations during optimization.
pub const MIN_DILATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PalsModel {
    pub n_bumps: usize,
    pub mu_in: f64,
    pub mu_out: f64,
    pub eps_heaviside: f64,
    pub eps_norm: f64,
    pub level: f64,
}

/// Which entry of a bump a parameter index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Dilation,
    CenterX,
    CenterY,
}

/// `∂μ/∂p_k` at the nodes where it can be nonzero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagonalDerivative {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl DiagonalDerivative {
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            d[i] = v;
        }
        d
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for v in &mut self.values {
            *v *= s;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

#[inline]
pub fn wendland(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let t = 1.0 - r;
        let t2 = t * t;
        t2 * t2 * (4.0 * r + 1.0)
    }
}

#[inline]
fn wendland_prime(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let t = 1.0 - r;
        -20.0 * r * t * t * t
    }
}

#[inline]
pub fn heaviside(t: f64, eps: f64) -> f64 {
    0.5 * (1.0 + (2.0 / PI) * libm::atan(t / eps))
}

#[inline]
pub fn heaviside_prime(t: f64, eps: f64) -> f64 {
    eps / (PI * (eps * eps + t * t))
}

impl PalsModel {
    pub fn new(n_bumps: usize, mu_in: f64, mu_out: f64) -> Self {
        Self {
            n_bumps,
            mu_in,
            mu_out,
            eps_heaviside: 0.05,
            eps_norm: 1e-3,
            level: 0.0,
        }
    }

    pub fn n_params(&self) -> usize {
        4 * self.n_bumps
    }

    pub fn param_kind(&self, k: usize) -> Result<(usize, ParamKind)> {
        let m = self.n_bumps;
        if k >= 4 * m {
            return Err(Error::InvalidParameter(format!(
                "parameter index {k} out of range 0..{}",
                4 * m
            )));
        }
        Ok(match k / m {
            0 => (k, ParamKind::Weight),
            1 => (k - m, ParamKind::Dilation),
            _ => {
                let c = k - 2 * m;
                (c / 2, if c.is_multiple_of(2) { ParamKind::CenterX } else { ParamKind::CenterY })
            }
        })
    }

    pub fn weight(&self, p: &[f64], j: usize) -> f64 {
        p[j]
    }

    pub fn dilation(&self, p: &[f64], j: usize) -> f64 {
        p[self.n_bumps + j]
    }

    pub fn center(&self, p: &[f64], j: usize) -> [f64; 2] {
        let o = 2 * self.n_bumps + 2 * j;
        [p[o], p[o + 1]]
    }

    /// Packs per-bump values into a parameter vector.
    pub fn pack(&self, weights: &[f64], dilations: &[f64], centers: &[[f64; 2]]) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(weights);
        p.extend_from_slice(dilations);
        for c in centers {
            p.extend_from_slice(c);
        }
        p
    }

    /// Raises every dilation to at least [`MIN_DILATION`].
    pub fn clamp_dilations(&self, p: &mut [f64]) {
        for b in &mut p[self.n_bumps..2 * self.n_bumps] {
            if !(*b >= MIN_DILATION) {
                *b = MIN_DILATION;
            }
        }
    }

    fn validate(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: p.len(),
            });
        }
        for j in 0..self.n_bumps {
            let b = self.dilation(p, j);
            if !(b > 0.0) {
                return Err(Error::InvalidParameter(format!("dilation {j} must be positive, got {b}")));
            }
        }
        Ok(())
    }

    #[inline]
    fn radius(&self, beta: f64, d: [f64; 2]) -> f64 {
        sqrt(beta * beta * (d[0] * d[0] + d[1] * d[1]) + self.eps_norm * self.eps_norm)
    }

    pub fn eval_levelset(&self, p: &[f64], nodes: &[[f64; 2]]) -> Result<Vec<f64>> {
        self.validate(p)?;
        let mut phi = vec![0.0; nodes.len()];
        for j in 0..self.n_bumps {
            let (a, b, c) = (self.weight(p, j), self.dilation(p, j), self.center(p, j));
            for (x, f) in nodes.iter().zip(phi.iter_mut()) {
                *f += a * wendland(self.radius(b, [x[0] - c[0], x[1] - c[1]]));
            }
        }
        Ok(phi)
    }

    fn absorption_from_levelset(&self, phi: &[f64]) -> Vec<f64> {
        let jump = self.mu_in - self.mu_out;
        phi.iter()
            .map(|&f| self.mu_out + jump * heaviside(f - self.level, self.eps_heaviside))
            .collect()
    }

    pub fn eval_absorption(&self, p: &[f64], nodes: &[[f64; 2]]) -> Result<Vec<f64>> {
        let phi = self.eval_levelset(p, nodes)?;
        Ok(self.absorption_from_levelset(&phi))
    }

    /// `∂μ/∂p_k` over the support of the bump owning parameter `k`.
    pub fn absorption_jacobian(&self, p: &[f64], nodes: &[[f64; 2]], k: usize) -> Result<DiagonalDerivative> {
        let (j, kind) = self.param_kind(k)?;
        let phi = self.eval_levelset(p, nodes)?;
        let all = self.bump_derivatives(p, nodes, &phi, j);
        let slot = match kind {
            ParamKind::Weight => 0,
            ParamKind::Dilation => 1,
            ParamKind::CenterX => 2,
            ParamKind::CenterY => 3,
        };
        Ok(all.into_iter().nth(slot).unwrap_or_default())
    }

    /// `∂μ/∂p_k` for every parameter, in parameter order.
    pub fn absorption_jacobian_all(&self, p: &[f64], nodes: &[[f64; 2]]) -> Result<Vec<DiagonalDerivative>> {
        let phi = self.eval_levelset(p, nodes)?;
        let m = self.n_bumps;
        let mut out = vec![DiagonalDerivative::default(); 4 * m];
        for j in 0..m {
            let [da, db, dx, dy] = self.bump_derivatives(p, nodes, &phi, j);
            out[j] = da;
            out[m + j] = db;
            out[2 * m + 2 * j] = dx;
            out[2 * m + 2 * j + 1] = dy;
        }
        Ok(out)
    }

    /// Derivatives with respect to `(α_j, β_j, χ_jx, χ_jy)`.
    fn bump_derivatives(&self, p: &[f64], nodes: &[[f64; 2]], phi: &[f64], j: usize) -> [DiagonalDerivative; 4] {
        let (a, b, c) = (self.weight(p, j), self.dilation(p, j), self.center(p, j));
        let jump = self.mu_in - self.mu_out;
        let mut out: [DiagonalDerivative; 4] = Default::default();
        for (i, x) in nodes.iter().enumerate() {
            let d = [x[0] - c[0], x[1] - c[1]];
            let s = self.radius(b, d);
            if s >= 1.0 {
                continue;
            }
            let outer = jump * heaviside_prime(phi[i] - self.level, self.eps_heaviside);
            let dpsi = wendland_prime(s);
            let dist2 = d[0] * d[0] + d[1] * d[1];
            let grads = [
                wendland(s),
                a * dpsi * b * dist2 / s,
                -a * dpsi * b * b * d[0] / s,
                -a * dpsi * b * b * d[1] / s,
            ];
            for (o, g) in out.iter_mut().zip(grads) {
                o.indices.push(i);
                o.values.push(outer * g);
            }
        }
        out
    }
}
