//! Convergence of ∫_{Ω*} Q*(ξ)^α (1+|ln Q*_r(ξ)|)^β e^{−c(ξ|e)} dξ: the
//! analytic rule and depth-ladder evidence.

use super::verify::log_gamma_proposal;
use super::{integrate_cone, ConeSampler, Coord1D, Estimate, OffScale};
use crate::cone_algebra::{pair_matrices, ConeSpec, Pairing, Side};
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    Converges,
    Diverges,
    Inconclusive,
}

/// Closed-form rule. The last block (m_r = 0) carries the logarithm.
pub fn analytic_sharp(cone: &ConeSpec, alpha: &[f64], beta: f64) -> Growth {
    let r = cone.rank();
    let m = cone.m();
    let inner = (0..r - 1).all(|j| alpha[j] > -(m[j] as f64) / 2.0 - 1.0);
    let last = alpha[r - 1] > -1.0 || (alpha[r - 1] == -1.0 && beta < -1.0);
    if inner && last {
        Growth::Converges
    } else {
        Growth::Diverges
    }
}

/// Parameters of a depth ladder. Depth S = −ln Q*_r; level k truncates to
/// S ≤ 2^k, level 0 is the core S ≤ 1.
#[derive(Clone, Debug, Serialize)]
pub struct DepthSetup {
    pub alpha: Vec<f64>,
    pub beta: f64,
    /// c in e^{−c(ξ|e)}.
    pub pairing_scale: f64,
    pub max_level: u32,
    pub samples_per_level: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DepthEvidence {
    pub depths: Vec<f64>,
    pub shells: Vec<Estimate>,
    pub totals: Vec<f64>,
    /// (I_k − I_{k−1})/I_k for k ≥ 1.
    pub relative_increments: Vec<f64>,
}

impl DepthEvidence {
    pub fn last_relative_increment(&self) -> f64 {
        *self.relative_increments.last().unwrap_or(&0.0)
    }

    /// Ratios of successive shell contributions.
    pub fn increment_ratios(&self) -> Vec<f64> {
        self.shells.windows(2).skip(1).map(|w| w[1].value / w[0].value).collect()
    }
}

pub fn depth_integral(cone: &Arc<ConeSpec>, setup: &DepthSetup) -> DepthEvidence {
    let r = cone.rank();
    let m = cone.m();
    let dims = cone.block_dims();
    let c = setup.pairing_scale;
    let weights = Pairing::Unit.block_weights(cone);
    let e = cone.identity();
    let alpha = setup.alpha.clone();
    let beta = setup.beta;
    let log_f = move |p: &super::ChartSample| {
        let s = p.sigma[r - 1];
        -c * pair_matrices(cone, &p.point, &e, &weights)
            + p.sigma.iter().zip(&alpha).map(|(x, a)| 2.0 * a * x).sum::<f64>()
            + beta * (1.0 + (2.0 * s).abs()).ln()
    };
    let mut sigma: Vec<Coord1D> = (0..r - 1)
        .map(|j| log_gamma_proposal(setup.alpha[j] + 1.0 + m[j] as f64 / 2.0, c * dims[j] as f64))
        .collect();
    sigma.push(Coord1D::Above { lo: -0.5, scale: 0.7, df: 3.0 });
    // the off-diagonal Gaussian has variance 1/(2c)
    let base = ConeSampler::new(cone, Side::Dual, sigma).with_off(4.0, OffScale::Fixed(0.8 / c.sqrt()));
    let rate = 2.0 * setup.alpha[r - 1] + 2.0;
    let mut depths = vec![1.0];
    let mut shells = vec![integrate_cone(&base, &log_f, setup.samples_per_level, setup.seed)];
    for k in 1..=setup.max_level {
        let hi = -(2f64.powi(k as i32 - 1)) / 2.0;
        let lo = -(2f64.powi(k as i32)) / 2.0;
        let mut s = base.clone();
        s.sigma[r - 1] = Coord1D::Exponential { lo, hi, rate };
        shells.push(integrate_cone(&s, &log_f, setup.samples_per_level, setup.seed.wrapping_add(k as u64)));
        depths.push(2f64.powi(k as i32));
    }
    let mut totals = Vec::new();
    let mut acc = 0.0;
    for s in &shells {
        acc += s.value;
        totals.push(acc);
    }
    let relative_increments = (1..totals.len()).map(|k| shells[k].value / totals[k]).collect();
    DepthEvidence { depths, shells, totals, relative_increments }
}

/// Least-squares fit I ≈ a + b·φ_p(1+S), φ_p(x) = (x^p − 1)/p, φ_0 = ln.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub power: f64,
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn growth_fit(depths: &[f64], totals: &[f64], power: f64) -> GrowthFit {
    let xs: Vec<f64> = depths
        .iter()
        .map(|s| if power == 0.0 { (1.0 + s).ln() } else { ((1.0 + s).powf(power) - 1.0) / power })
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = totals.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(totals).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = totals.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 0.0 } else { sxy * sxy / (sxx * syy) };
    GrowthFit { power, intercept, slope, r_squared }
}

pub const FIT_POWERS: [f64; 9] = [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Debug, Serialize)]
pub struct SharpReport {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub analytic: Growth,
    pub numeric: Growth,
    pub agree: bool,
    pub best_fit: GrowthFit,
    pub log_fit: GrowthFit,
    pub evidence: DepthEvidence,
}

/// Fits over levels k ≥ 1 and picks the best power.
pub fn fits(evidence: &DepthEvidence) -> (GrowthFit, GrowthFit) {
    let d = &evidence.depths[1..];
    let t = &evidence.totals[1..];
    let best = FIT_POWERS
        .iter()
        .map(|p| growth_fit(d, t, *p))
        .max_by(|a, b| a.r_squared.partial_cmp(&b.r_squared).unwrap())
        .unwrap();
    (best, growth_fit(d, t, 0.0))
}

pub fn classify_i_alpha_beta(cone: &Arc<ConeSpec>, alpha: &[f64], beta: f64, samples_per_level: usize, seed: u64) -> SharpReport {
    let analytic = analytic_sharp(cone, alpha, beta);
    let setup = DepthSetup {
        alpha: alpha.to_vec(),
        beta,
        pairing_scale: 1.0,
        max_level: 9,
        samples_per_level,
        seed,
    };
    let evidence = depth_integral(cone, &setup);
    let (best_fit, log_fit) = fits(&evidence);
    let last = evidence.last_relative_increment();
    let numeric = if best_fit.r_squared > 0.99 && best_fit.slope > 0.0 && last > 0.01 {
        Growth::Diverges
    } else if last < 0.005 {
        Growth::Converges
    } else {
        Growth::Inconclusive
    };
    SharpReport {
        alpha: alpha.to_vec(),
        beta,
        analytic,
        numeric,
        agree: analytic == numeric,
        best_fit,
        log_fit,
        evidence,
    }
}
