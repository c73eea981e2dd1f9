//! Monte Carlo integration on cone-parametrized and flat domains, divergence
//! ladders, and verifiers for the integral identities.

mod ladder;
mod sharp;
mod siegel;
mod verify;

pub use ladder::{judge_ladder, LadderReport, LadderRule};
pub use sharp::{
    analytic_sharp, classify_i_alpha_beta, depth_integral, growth_fit, DepthEvidence, DepthSetup,
    fits, GrowthFit, Growth, SharpReport, FIT_POWERS,
};
pub use siegel::{verify_hermitian_form, verify_siegel_integral, SiegelData, SiegelProbe};
pub use verify::{
    calibrate_pairing, gamma_omega, ratio_agreement, verify_beta, verify_integ, verify_j_alpha,
    verify_j_alpha_lower, CalibrationReport, GammaReport, IntegralReport, ProbeRatio,
    QuadConfig, Verdict,
};

use crate::chart::HaarChart;
use crate::cone_algebra::{ConeSpec, Side};
use crate::linalg::Mat;
use crate::par::{map_indexed, stream_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::sync::Arc;

/// Batches per estimate; fixed so results do not depend on the thread count.
pub const BATCHES: usize = 64;

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.value.abs().max(f64::MIN_POSITIVE)
    }

    pub fn scaled(&self, c: f64) -> Estimate {
        Estimate { value: self.value * c, stderr: self.stderr * c.abs(), samples: self.samples }
    }

    pub fn plus(&self, other: &Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            stderr: self.stderr.hypot(other.stderr),
            samples: self.samples + other.samples,
        }
    }

    pub fn zero() -> Estimate {
        Estimate { value: 0.0, stderr: 0.0, samples: 0 }
    }
}

/// Mean of `draw` over `samples` draws split into `BATCHES` independent
/// streams; stderr from the spread of batch means.
pub fn mc_mean<F>(samples: usize, seed: u64, draw: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    let per = samples.div_ceil(BATCHES).max(1);
    let means = map_indexed(BATCHES, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let mut acc = 0.0;
        for _ in 0..per {
            let v = draw(&mut rng);
            if v.is_finite() {
                acc += v;
            } else {
                acc = f64::INFINITY;
            }
        }
        acc / per as f64
    });
    batch_estimate(&means, per * BATCHES)
}

pub fn batch_estimate(means: &[f64], samples: usize) -> Estimate {
    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0).max(1.0);
    Estimate { value: mean, stderr: (var / b).sqrt(), samples }
}

/// ψ₁(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0 + (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 / 42.0)) * x2 / x
}

fn student_log_norm(df: f64) -> f64 {
    ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * PI).ln()
}

/// One-dimensional proposal.
#[derive(Clone, Debug)]
pub enum Coord1D {
    /// loc + scale·T_df
    Student { loc: f64, scale: f64, df: f64 },
    /// Uniform on [lo, hi].
    Uniform { lo: f64, hi: f64 },
    /// lo + scale·|T_df|
    Above { lo: f64, scale: f64, df: f64 },
    /// Density ∝ e^{rate·x} on [lo, hi].
    Exponential { lo: f64, hi: f64, rate: f64 },
}

impl Coord1D {
    /// Returns (x, ln density).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match *self {
            Coord1D::Student { loc, scale, df } => {
                let z: f64 = StudentT::new(df).unwrap().sample(rng);
                let lp = student_log_norm(df) - (df + 1.0) / 2.0 * (1.0 + z * z / df).ln() - scale.ln();
                (loc + scale * z, lp)
            }
            Coord1D::Uniform { lo, hi } => (rng.random_range(lo..hi), -(hi - lo).ln()),
            Coord1D::Above { lo, scale, df } => {
                let z: f64 = StudentT::new(df).unwrap().sample(rng);
                let z = z.abs();
                let lp = std::f64::consts::LN_2 + student_log_norm(df)
                    - (df + 1.0) / 2.0 * (1.0 + z * z / df).ln()
                    - scale.ln();
                (lo + scale * z, lp)
            }
            Coord1D::Exponential { lo, hi, rate } => {
                let w = hi - lo;
                if (rate * w).abs() < 1e-9 {
                    return (rng.random_range(lo..hi), -w.ln());
                }
                let u: f64 = rng.random();
                // inverse CDF of the truncated exponential, stable for either sign
                let x = if rate > 0.0 {
                    hi + (u + (1.0 - u) * (-rate * w).exp()).ln() / rate
                } else {
                    lo + ((1.0 - u) + u * (rate * w).exp()).ln() / rate
                };
                let x = x.clamp(lo, hi);
                let log_norm = if rate > 0.0 {
                    rate.ln() - (1.0 - (-rate * w).exp()).ln() - rate * hi
                } else {
                    (-rate).ln() - (1.0 - (rate * w).exp()).ln() - rate * lo
                };
                (x, log_norm + rate * x)
            }
        }
    }
}

/// Scale rule for proposals of off-diagonal factor entries.
#[derive(Clone, Debug)]
pub enum OffScale {
    Fixed(f64),
    /// base·sqrt((1+ρ_i²)(1+ρ_j²)) for an entry of block (i, j).
    Adaptive(f64),
}

/// Proposal on a cone chart. Draws direct factor entries, then optionally
/// transports the factor by a fixed group element (t = g·t′ on the primal
/// side, s = s′·g on the dual side), which preserves the Haar density.
#[derive(Clone, Debug)]
pub struct ConeSampler {
    pub chart: HaarChart,
    pub sigma: Vec<Coord1D>,
    pub off_df: f64,
    pub off_scale: OffScale,
    /// Draws whose σ lies in this box get weight 0.
    pub exclude: Option<Vec<(f64, f64)>>,
    pub transport: Option<Mat>,
}

/// A drawn point with its factor.
#[derive(Clone, Debug)]
pub struct ChartSample {
    pub factor: Mat,
    pub point: Mat,
    /// ln ρ_j of the factor of `point`.
    pub sigma: Vec<f64>,
}

impl ChartSample {
    /// ln Q_j (primal) or ln Q*_j (dual).
    pub fn log_q(&self, j: usize) -> f64 {
        2.0 * self.sigma[j]
    }
}

impl ConeSampler {
    pub fn new(cone: &Arc<ConeSpec>, side: Side, sigma: Vec<Coord1D>) -> ConeSampler {
        assert_eq!(sigma.len(), cone.rank());
        ConeSampler {
            chart: HaarChart::new(cone, side),
            sigma,
            off_df: 4.0,
            off_scale: OffScale::Fixed(0.8),
            exclude: None,
            transport: None,
        }
    }

    pub fn with_off(mut self, df: f64, scale: OffScale) -> ConeSampler {
        self.off_df = df;
        self.off_scale = scale;
        self
    }

    pub fn with_transport(mut self, g: Mat) -> ConeSampler {
        self.transport = Some(g);
        self
    }

    pub fn with_exclusion(mut self, bx: Vec<(f64, f64)>) -> ConeSampler {
        self.exclude = Some(bx);
        self
    }

    /// Draws a sample and ln(Jacobian / proposal density); None for excluded draws.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(ChartSample, f64)> {
        let cone = &self.chart.cone;
        let mut log_p = 0.0;
        let mut sigma = Vec::with_capacity(self.sigma.len());
        for c in &self.sigma {
            let (x, lp) = c.draw(rng);
            sigma.push(x);
            log_p += lp;
        }
        let excluded = self
            .exclude
            .as_ref()
            .is_some_and(|bx| sigma.iter().zip(bx).all(|(s, (lo, hi))| s >= lo && s <= hi));
        let rho: Vec<f64> = sigma.iter().map(|s| s.exp()).collect();
        let blocks = cone.off_blocks();
        let t_dist = StudentT::new(self.off_df).unwrap();
        let log_norm = student_log_norm(self.off_df);
        let mut off = Vec::with_capacity(blocks.len());
        for &(i, j) in &blocks {
            let scale = match self.off_scale {
                OffScale::Fixed(s) => s,
                OffScale::Adaptive(b) => b * ((1.0 + rho[i] * rho[i]) * (1.0 + rho[j] * rho[j])).sqrt(),
            };
            let z: f64 = t_dist.sample(rng);
            log_p += log_norm - (self.off_df + 1.0) / 2.0 * (1.0 + z * z / self.off_df).ln() - scale.ln();
            off.push(scale * z);
        }
        if excluded {
            return None;
        }
        // density in Haar coordinates: dw = ρ_b du
        log_p += self.chart.log_direct_scale(&sigma);
        let mut t = cone.triangular(&rho, &off);
        let mut sig = sigma;
        if let Some(g) = &self.transport {
            t = match self.chart.side {
                Side::Primal => g.mul(&t),
                Side::Dual => t.mul(g),
            };
            let (diag, _) = cone.triangular_params(&t);
            sig = diag.iter().map(|d| d.ln()).collect();
        }
        let log_j = self.chart.log_jacobian(&sig);
        let point = self.chart.point(&t);
        Some((ChartSample { factor: t, point, sigma: sig }, log_j - log_p))
    }
}

/// ∫ f over the sampler's domain, where `log_f` returns ln f (−∞ for 0).
pub fn integrate_cone<F>(sampler: &ConeSampler, log_f: F, samples: usize, seed: u64) -> Estimate
where
    F: Fn(&ChartSample) -> f64 + Sync + Send,
{
    mc_mean(samples, seed, |rng| match sampler.draw(rng) {
        Some((s, lw)) => {
            let lf = log_f(&s);
            if lf == f64::NEG_INFINITY {
                0.0
            } else {
                (lf + lw).exp()
            }
        }
        None => 0.0,
    })
}

/// Multivariate Student-t in R^d (df = 1 is the multivariate Cauchy).
#[derive(Clone, Debug)]
pub struct MultiT {
    pub center: Vec<f64>,
    pub scale: f64,
    pub df: f64,
}

impl MultiT {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let d = self.center.len();
        let chi: f64 = rand_distr::ChiSquared::new(self.df).unwrap().sample(rng);
        let k = (self.df / chi).sqrt();
        let mut x = Vec::with_capacity(d);
        let mut r2 = 0.0;
        for c in &self.center {
            let z: f64 = rng.sample(StandardNormal);
            let v = z * k;
            r2 += v * v;
            x.push(c + self.scale * v);
        }
        (x, self.log_density_std(r2, d))
    }

    fn log_density_std(&self, r2: f64, d: usize) -> f64 {
        let df = self.df;
        let df_d = d as f64;
        ln_gamma((df + df_d) / 2.0) - ln_gamma(df / 2.0) - df_d / 2.0 * (df * PI).ln()
            - df_d * self.scale.ln()
            - (df + df_d) / 2.0 * (1.0 + r2 / df).ln()
    }
}

/// Uniform on the spherical shell r_in ≤ |x| ≤ r_out in R^d.
pub fn draw_annulus<R: Rng + ?Sized>(rng: &mut R, d: usize, r_in: f64, r_out: f64) -> (Vec<f64>, f64) {
    let df = d as f64;
    let u: f64 = rng.random();
    let r = (r_in.powf(df) + u * (r_out.powf(df) - r_in.powf(df))).powf(1.0 / df);
    let mut z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in z.iter_mut() {
        *v *= r / norm;
    }
    let log_vol = (df / 2.0) * PI.ln() - ln_gamma(df / 2.0 + 1.0)
        + (r_out.powf(df) - r_in.powf(df)).ln();
    (z, -log_vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_algebra::builtin_cone;

    #[test]
    fn trigamma_values() {
        assert!((trigamma(1.0) - PI * PI / 6.0).abs() < 1e-10);
        assert!((trigamma(0.5) - PI * PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn proposals_integrate_to_one() {
        for c in [
            Coord1D::Student { loc: 0.3, scale: 0.7, df: 3.0 },
            Coord1D::Uniform { lo: -1.0, hi: 2.0 },
            Coord1D::Above { lo: -0.5, scale: 1.2, df: 3.0 },
            Coord1D::Exponential { lo: -4.0, hi: -1.0, rate: 2.0 },
            Coord1D::Exponential { lo: -4.0, hi: -1.0, rate: -0.5 },
        ] {
            // E_p[1/p · 1_{[a,b]}] = b − a on a window inside the support
            let (a, b) = (-0.9, 0.4);
            let est = mc_mean(200_000, 5, |rng| {
                let (x, lp) = c.draw(rng);
                if x >= a && x <= b { (-lp).exp() } else { 0.0 }
            });
            let inside = match c {
                Coord1D::Exponential { .. } => 0.0,
                Coord1D::Above { lo, .. } => b - lo.max(a),
                _ => b - a,
            };
            assert!((est.value - inside).abs() < 4.0 * est.stderr + 1e-9, "{c:?} {est:?}");
        }
    }

    #[test]
    fn exponential_draws_stay_in_range() {
        let c = Coord1D::Exponential { lo: -3.0, hi: -1.0, rate: 4.0 };
        let mut rng = stream_rng(1, 0);
        let mean: f64 = (0..20000).map(|_| c.draw(&mut rng).0).sum::<f64>() / 20000.0;
        // mean of a truncated exponential with rate 4 on [-3,-1]
        let w: f64 = 2.0;
        let exact = -1.0 - 1.0 / 4.0 + w * (-4.0 * w).exp() / (1.0 - (-4.0 * w).exp());
        assert!((mean - exact).abs() < 0.01);
    }

    #[test]
    fn halfline_exponential_integral() {
        let cone = builtin_cone("halfline").unwrap();
        let sampler = ConeSampler::new(&cone, Side::Primal, vec![Coord1D::Student { loc: 0.0, scale: 0.8, df: 3.0 }]);
        let est = integrate_cone(&sampler, |s| -s.point[(0, 0)], 200_000, 1);
        assert!((est.value - 1.0).abs() < 4.0 * est.stderr && est.stderr < 0.01);
    }

    #[test]
    fn annulus_volume() {
        // ∫ 1 over the shell 1 ≤ |x| ≤ 2 in R^2 = 3π
        let est = mc_mean(1000, 2, |rng| (-draw_annulus(rng, 2, 1.0, 2.0).1).exp());
        assert!((est.value - 3.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn multi_t_density_normalized() {
        // E_p[1/p · 1_{|x|<1}] = π in R^2
        let prop = MultiT { center: vec![0.2, -0.1], scale: 0.9, df: 1.0 };
        let est = mc_mean(400_000, 3, |rng| {
            let (x, lp) = prop.draw(rng);
            if x[0] * x[0] + x[1] * x[1] < 1.0 { (-lp).exp() } else { 0.0 }
        });
        assert!((est.value - PI).abs() < 4.0 * est.stderr, "{est:?}");
    }
}
