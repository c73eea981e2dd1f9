//! Parametrizations of Ω and Ω* by the triangular group.
//!
//! Haar coordinates (σ, u): primal factors t = D(I+U) with D = diag(e^{σ_j}),
//! dual factors s = (I+V)D. Left (resp. right) Haar measure is dσ du, and
//! Lebesgue measure on E pulls back to J₀·Π e^{2τ_jσ_j} dσ du with J₀ constant.

use crate::cone_algebra::{ConeSpec, Side};
use crate::linalg::Mat;
use nalgebra::DMatrix;
use std::sync::Arc;

const FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct HaarChart {
    pub cone: Arc<ConeSpec>,
    pub side: Side,
    two_tau: Vec<f64>,
    /// Diagonal block that scales each off-diagonal parameter.
    scale_block: Vec<usize>,
    log_j0: f64,
}

impl HaarChart {
    pub fn new(cone: &Arc<ConeSpec>, side: Side) -> HaarChart {
        let scale_block = cone
            .off_blocks()
            .iter()
            .map(|&(i, j)| if side == Side::Primal { i } else { j })
            .collect();
        let mut chart = HaarChart {
            cone: cone.clone(),
            side,
            two_tau: cone.tau().iter().map(|t| 2.0 * t).collect(),
            scale_block,
            log_j0: 0.0,
        };
        chart.log_j0 = chart.numeric_log_j0(&vec![0.0; cone.off_dim()]);
        chart
    }

    pub fn rank(&self) -> usize {
        self.cone.rank()
    }

    pub fn off_dim(&self) -> usize {
        self.scale_block.len()
    }

    pub fn scale_block(&self) -> &[usize] {
        &self.scale_block
    }

    /// Factor from Haar coordinates.
    pub fn factor(&self, sigma: &[f64], u: &[f64]) -> Mat {
        let rho: Vec<f64> = sigma.iter().map(|s| s.exp()).collect();
        let off: Vec<f64> =
            u.iter().zip(&self.scale_block).map(|(v, &b)| v * rho[b]).collect();
        self.cone.triangular(&rho, &off)
    }

    /// Haar coordinates of a factor.
    pub fn coordinates(&self, t: &Mat) -> (Vec<f64>, Vec<f64>) {
        let (rho, off) = self.cone.triangular_params(t);
        let u = off.iter().zip(&self.scale_block).map(|(w, &b)| w / rho[b]).collect();
        (rho.iter().map(|v| v.ln()).collect(), u)
    }

    /// t·tᵀ (primal) or proj(sᵀ·s) (dual).
    pub fn point(&self, t: &Mat) -> Mat {
        match self.side {
            Side::Primal => t.mul_transpose(t),
            Side::Dual => self.cone.project(&t.transpose_mul(t)),
        }
    }

    /// ln |det ∂coords/∂(σ,u)| for a factor with diagonal log-scales σ.
    pub fn log_jacobian(&self, sigma: &[f64]) -> f64 {
        self.log_j0 + sigma.iter().zip(&self.two_tau).map(|(s, t)| s * t).sum::<f64>()
    }

    /// ln |∂(direct entries)/∂u| = Σ_k σ_{scale_block(k)}.
    pub fn log_direct_scale(&self, sigma: &[f64]) -> f64 {
        self.scale_block.iter().map(|&b| sigma[b]).sum()
    }

    pub fn log_j0(&self) -> f64 {
        self.log_j0
    }

    /// Central-difference ln|det| of (σ,u) ↦ coords at σ = 0.
    pub fn numeric_log_j0(&self, u: &[f64]) -> f64 {
        let r = self.rank();
        let n = self.cone.dim();
        let mut params: Vec<f64> = vec![0.0; r];
        params.extend_from_slice(u);
        let eval = |p: &[f64]| {
            let t = self.factor(&p[..r], &p[r..]);
            self.cone.coords(&self.point(&t))
        };
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = FD_STEP * (1.0 + params[k].abs());
            let mut plus = params.clone();
            plus[k] += h;
            let mut minus = params.clone();
            minus[k] -= h;
            let (a, b) = (eval(&plus), eval(&minus));
            for row in 0..n {
                jac[(row, k)] = (a[row] - b[row]) / (2.0 * h);
            }
        }
        jac.determinant().abs().ln()
    }
}

/// Numeric |det| of the direct chart (ρ, off-diagonal entries) ↦ coords.
pub fn direct_jacobian(cone: &ConeSpec, side: Side, rho: &[f64], off: &[f64]) -> f64 {
    let r = cone.rank();
    let n = cone.dim();
    let mut params: Vec<f64> = rho.to_vec();
    params.extend_from_slice(off);
    let eval = |p: &[f64]| {
        let t = cone.triangular(&p[..r], &p[r..]);
        let m = match side {
            Side::Primal => t.mul_transpose(&t),
            Side::Dual => cone.project(&t.transpose_mul(&t)),
        };
        cone.coords(&m)
    };
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let h = FD_STEP * (1.0 + params[k].abs());
        let mut plus = params.clone();
        plus[k] += h;
        let mut minus = params.clone();
        minus[k] -= h;
        let (a, b) = (eval(&plus), eval(&minus));
        for row in 0..n {
            jac[(row, k)] = (a[row] - b[row]) / (2.0 * h);
        }
    }
    jac.determinant().abs()
}
