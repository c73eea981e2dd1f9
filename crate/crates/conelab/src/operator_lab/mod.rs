//! Discretized positive Bergman-type operators: assembly, ℓ^q→ℓ^s norm lower
//! bounds, threshold sweeps, the Okikiolu test, scaling and the necessity
//! counterexample.

mod counterexample;
mod okikiolu;
mod scaling;
mod sweep;

pub use counterexample::{
    counterexample_alpha, counterexample_necessary, critical_exponent, CounterexampleConfig, CounterexampleReport,
    BAND_TAIL, CAUCHY_TAIL, INCREMENT_BAND, LOG_FIT_R2,
};
pub use okikiolu::{
    discrete_okikiolu_constants, okikiolu_params, okikiolu_verify, random_param_set, DiscreteCheck, OkikioluParams,
    OkikioluReport,
};
pub use scaling::{gauss_legendre, predicted_exponent, scaling_exponent_check, ScalingReport, SCALING_TOLERANCE};
pub use sweep::{
    classify_growth, sweep_q, FibredKernel, SweepClass, SweepConfig, SweepResult, ToeplitzGrid,
};

use crate::cone_algebra::ConeSpec;
use crate::error::{Error, Result};
use crate::geometry::Lattice;
use crate::indices::ParamSet;
use crate::par::{map_indexed, stream_rng};
use crate::rational::to_f64;
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use std::sync::Arc;

/// A nonnegative linear map given by its action and its transpose.
pub trait PositiveOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64>;
}

impl PositiveOperator for DMatrix<f64> {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        map_indexed(self.nrows(), |i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        map_indexed(self.ncols(), |j| self.column(j).iter().zip(y).map(|(a, b)| a * b).sum())
    }
}

/// The transpose of another operator.
pub struct Transposed<'a, T: PositiveOperator>(pub &'a T);

impl<T: PositiveOperator> PositiveOperator for Transposed<'_, T> {
    fn rows(&self) -> usize {
        self.0.cols()
    }

    fn cols(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply_transpose(x)
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.0.apply(y)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEstimate {
    /// ‖Ax‖_s/‖x‖_q at the best iterate: a lower bound for ‖A‖.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct NormConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Starting vector; random positive when absent.
    pub start: Option<Vec<f64>>,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig { max_iterations: 2000, tolerance: 1e-8, seed: 1, start: None }
    }
}

fn p_norm(x: &[f64], p: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// v ↦ |v|^{p−1}, rescaled by the max entry first.
fn duality_map(v: &[f64], p: f64) -> Vec<f64> {
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|x| (x.abs() / m).powf(p - 1.0)).collect()
}

/// Lower bound for ‖A‖_{ℓ^q→ℓ^s}. Power iteration on AᵀA for q = s = 2,
/// otherwise the nonlinear fixed-point iteration x ← ψ_{q′}(Aᵀψ_s(Ax)).
pub fn norm_estimate<T: PositiveOperator>(op: &T, q: f64, s: f64, cfg: &NormConfig) -> NormEstimate {
    assert!(q > 1.0 && s > 1.0, "exponents must exceed 1");
    let n = op.cols();
    let mut x = match &cfg.start {
        Some(v) => v.iter().map(|a| a.abs() + 1e-300).collect(),
        None => {
            let mut rng = stream_rng(cfg.seed, 0);
            (0..n).map(|_| rng.random_range(0.5..1.5)).collect::<Vec<f64>>()
        }
    };
    let q_conj = q / (q - 1.0);
    let euclid = q == 2.0 && s == 2.0;
    let normalize = |x: &mut Vec<f64>| {
        let nx = p_norm(x, q);
        if nx > 0.0 {
            x.iter_mut().for_each(|v| *v /= nx);
        }
    };
    normalize(&mut x);
    let mut best = NormEstimate { value: 0.0, iterations: 0, converged: false, vector: x.clone() };
    let mut prev = 0.0;
    for it in 1..=cfg.max_iterations {
        let y = op.apply(&x);
        let value = p_norm(&y, s);
        if value > best.value {
            best.value = value;
            best.vector = x.clone();
        }
        best.iterations = it;
        if it > 1 && (value - prev).abs() <= cfg.tolerance * value.max(f64::MIN_POSITIVE) {
            best.converged = true;
            break;
        }
        prev = value;
        let z = if euclid { op.apply_transpose(&y) } else { op.apply_transpose(&duality_map(&y, s)) };
        x = if euclid { z } else { duality_map(&z, q_conj) };
        normalize(&mut x);
        if x.iter().all(|v| *v == 0.0) {
            break;
        }
    }
    best
}

/// Kernel of S on a lattice together with the weights of both sides.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteOperator {
    /// Lattice points in coordinates.
    pub points: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    /// ln M_jk with M_jk = Q^α(y_j) Q^{−γ}(y_j+y_k) Q^{β+τ}(y_k).
    #[serde(skip)]
    pub log_kernel: DMatrix<f64>,
    /// ln Q_i(y_j), one row per point.
    #[serde(skip)]
    pub log_q: Vec<Vec<f64>>,
    /// ln Q_i(y_j + y_k) at index (j·n + k)·r + i.
    #[serde(skip)]
    pub log_q_sum: Vec<f64>,
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kernel(&self) -> DMatrix<f64> {
        self.log_kernel.map(f64::exp)
    }

    /// A_jk = Q^{μ/s}(y_j) M_jk Q^{−ν/q}(y_k): the operator between the
    /// unweighted ℓ^q and ℓ^s isometric to the weighted cell spaces.
    pub fn normalized(&self, q: f64, s: f64) -> DMatrix<f64> {
        let left: Vec<f64> = self.log_q.iter().map(|lq| lq.iter().zip(&self.mu).map(|(a, b)| a * b / s).sum()).collect();
        let right: Vec<f64> = self.log_q.iter().map(|lq| lq.iter().zip(&self.nu).map(|(a, b)| a * b / q).sum()).collect();
        DMatrix::from_fn(self.len(), self.len(), |j, k| (self.log_kernel[(j, k)] + left[j] - right[k]).exp())
    }
}

/// Assembles S_{α,β,γ} on a lattice of the tube domain (b = 0).
pub fn assemble_s(cone: &Arc<ConeSpec>, ps: &ParamSet, lattice: &Lattice) -> Result<DiscreteOperator> {
    if lattice.is_empty() {
        return Err(Error::Precondition("lattice is empty".into()));
    }
    if ps.b.iter().any(|b| !num_traits::Zero::is_zero(b)) {
        return Err(Error::Precondition("assembly is implemented for the tube case b = 0".into()));
    }
    let f = |v: &[crate::rational::Rat]| v.iter().map(to_f64).collect::<Vec<f64>>();
    let (alpha, beta, gamma, nu, mu) = (f(&ps.alpha), f(&ps.beta), f(&ps.gamma), f(&ps.nu), f(&ps.mu));
    let tau = cone.tau();
    let beta_tau: Vec<f64> = beta.iter().zip(&tau).map(|(a, b)| a + b).collect();
    let log_q: Vec<Vec<f64>> = lattice
        .points
        .iter()
        .map(|p| cone.q_values(&p.embedded).map(|q| q.iter().map(|v| v.ln()).collect()))
        .collect::<Result<_>>()?;
    let n = lattice.len();
    let r = cone.rank();
    let sums: Vec<Result<Vec<f64>>> = map_indexed(n, |j| {
        let yj = &lattice.points[j].embedded;
        let mut row = Vec::with_capacity(n * r);
        for k in 0..n {
            row.extend(cone.q_values(&yj.add(&lattice.points[k].embedded))?.iter().map(|v| v.ln()));
        }
        Ok(row)
    });
    let mut log_q_sum = Vec::with_capacity(n * n * r);
    for row in sums {
        log_q_sum.extend(row?);
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let log_kernel = DMatrix::from_fn(n, n, |j, k| {
        let at = (j * n + k) * r;
        dot(&alpha, &log_q[j]) - dot(&gamma, &log_q_sum[at..at + r]) + dot(&beta_tau, &log_q[k])
    });
    Ok(DiscreteOperator {
        points: lattice.points.iter().map(|p| p.coords.clone()).collect(),
        alpha,
        beta,
        gamma,
        nu,
        mu,
        log_kernel,
        log_q,
        log_q_sum,
    })
}
