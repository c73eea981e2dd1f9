//! Homogeneity of S under dilations, measured by quadrature.
//!
//! For f_R(x) = f(R·x), S(f_R)(y/R) = R^κ Sf(y) with
//! κ = −n + |γ| − |β| − |α| in the tube case. The check evaluates the left
//! side for a smooth bump f on a chart-space Gauss–Legendre grid and regresses
//! its logarithm against ln R.

use crate::chart::HaarChart;
use crate::cone_algebra::{log_power_f, ConeSpec, Side};
use crate::error::{Error, Result};
use crate::indices::{ser_rat, ParamSet};
use crate::par::map_indexed;
use crate::rational::{int, to_f64, Rat};
use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::Zero;
use serde::Serialize;
use std::sync::Arc;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1]
/// (Golub–Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub r_grid: Vec<f64>,
    /// ln S(f_R)(e/R) for each R.
    pub log_values: Vec<f64>,
    pub fitted_exponent: f64,
    #[serde(serialize_with = "ser_rat")]
    pub predicted_exponent: Rat,
    pub deviation: f64,
    pub regression_ok: bool,
    pub holds: bool,
}

/// Tolerance on |fitted − predicted|.
pub const SCALING_TOLERANCE: f64 = 1e-3;

/// −n + |γ| − |β| − |α|
pub fn predicted_exponent(cone: &ConeSpec, ps: &ParamSet) -> Rat {
    let sum = |v: &[Rat]| v.iter().fold(Rat::zero(), |a, b| a + b);
    -int(cone.dim() as i64) + sum(&ps.gamma) - sum(&ps.beta) - sum(&ps.alpha)
}

/// Sf(y) = Q^α(y) ∫_Ω Q^{−γ}(y + x) Q^β(x) f(x) dx for the bump
/// f = Π(1 − θ²)³ over chart coordinates θ = (σ + shift, u) ∈ [−1, 1]^{r+d}.
fn apply_to_bump(cone: &Arc<ConeSpec>, chart: &HaarChart, ps: &[Vec<f64>; 3], y: &crate::linalg::Mat, shift: f64, rule: &(Vec<f64>, Vec<f64>)) -> Result<f64> {
    let [alpha, beta, gamma] = ps;
    let r = cone.rank();
    let dim = r + chart.off_dim();
    let (nodes, weights) = rule;
    let k = nodes.len();
    let total = k.pow(dim as u32);
    let qy = cone.q_values(y)?;
    let terms: Vec<Result<f64>> = map_indexed(total, |mut idx| {
        let mut theta = Vec::with_capacity(dim);
        let mut w = 1.0;
        for _ in 0..dim {
            let i = idx % k;
            idx /= k;
            theta.push(nodes[i]);
            w *= weights[i] * (1.0 - nodes[i] * nodes[i]).powi(3);
        }
        let sigma: Vec<f64> = theta[..r].iter().map(|t| t - shift).collect();
        let x = chart.point(&chart.factor(&sigma, &theta[r..]));
        let qs = cone.q_values(&x.add(y))?;
        let log_qx: f64 = sigma.iter().zip(beta).map(|(s, b)| 2.0 * s * b).sum();
        Ok(w * (chart.log_jacobian(&sigma) + log_qx - log_power_f(gamma, &qs)).exp())
    });
    let mut acc = 0.0;
    for t in terms {
        acc += t?;
    }
    Ok((log_power_f(alpha, &qy) + acc.ln()).exp())
}

/// Regresses ln S(f_R)(e/R) on ln R and compares the slope with the
/// homogeneity exponent. `nodes` is the Gauss–Legendre order per coordinate.
pub fn scaling_exponent_check(cone: &Arc<ConeSpec>, ps: &ParamSet, r_grid: &[f64], nodes: usize) -> Result<ScalingReport> {
    if ps.b.iter().any(|b| !b.is_zero()) {
        return Err(Error::Precondition("scaling check is implemented for the tube case b = 0".into()));
    }
    if r_grid.len() < 2 || r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Precondition("need at least two positive dilation factors".into()));
    }
    let f = |v: &[Rat]| v.iter().map(to_f64).collect::<Vec<f64>>();
    let exps = [f(&ps.alpha), f(&ps.beta), f(&ps.gamma)];
    let chart = HaarChart::new(cone, Side::Primal);
    let rule = gauss_legendre(nodes);
    let e = cone.identity();
    let mut log_values = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        // R·x has σ shifted by ln R / 2, so f(R·x) lives at σ − ln R / 2
        let v = apply_to_bump(cone, &chart, &exps, &e.scale(1.0 / r), r.ln() / 2.0, &rule)?;
        log_values.push(v.ln());
    }
    let xs: Vec<f64> = r_grid.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = log_values.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&log_values).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let fitted = sxy / sxx;
    let predicted = predicted_exponent(cone, ps);
    let regression_ok = fitted.is_finite() && sxx > 0.0;
    let deviation = (fitted - to_f64(&predicted)).abs();
    Ok(ScalingReport {
        r_grid: r_grid.to_vec(),
        log_values,
        fitted_exponent: fitted,
        predicted_exponent: predicted,
        deviation,
        regression_ok,
        holds: regression_ok && deviation < SCALING_TOLERANCE,
    })
}
