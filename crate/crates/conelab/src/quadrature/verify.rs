//! Ratio-constancy verifiers for the cone integral identities.

use super::{
    draw_annulus, integrate_cone, judge_ladder, mc_mean, trigamma, ConeSampler, Coord1D, Estimate,
    LadderReport, LadderRule, MultiT, OffScale,
};
use crate::cone_algebra::{
    cholesky_dual, cholesky_upper, log_power_f, pair_matrices, ConeElement, ConeSpec, Pairing, Side,
};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::weights::WeightVector;
use serde::Serialize;
use statrs::function::gamma::{gamma, ln_gamma};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

#[derive(Clone, Debug, Serialize)]
pub struct QuadConfig {
    pub samples: usize,
    pub seed: u64,
    /// Maximal relative spread of the ratios for a consistent verdict.
    pub tolerance: f64,
    pub pairing: Pairing,
    /// Truncation levels k of the divergence ladder.
    pub ladder_levels: (u32, u32),
    pub ladder_samples: usize,
    pub rule: LadderRule,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            samples: 1_000_000,
            seed: 1,
            tolerance: 0.05,
            pairing: Pairing::Unit,
            ladder_levels: (2, 6),
            ladder_samples: 400_000,
            rule: LadderRule::default(),
        }
    }
}

impl QuadConfig {
    pub fn with_samples(mut self, samples: usize) -> QuadConfig {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> QuadConfig {
        self.seed = seed;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> QuadConfig {
        self.tolerance = tol;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Divergent,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRatio {
    pub probe: Vec<f64>,
    pub ratio: f64,
    pub stderr: f64,
    /// Exact ratio where a closed form exists.
    pub closed_form: Option<f64>,
}

impl ProbeRatio {
    pub fn closed_form_error(&self) -> Option<f64> {
        self.closed_form.map(|c| (self.ratio - c).abs() / c)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegralReport {
    pub identity: String,
    pub params: BTreeMap<String, Vec<String>>,
    pub probes: Vec<ProbeRatio>,
    pub spread: f64,
    pub tolerance: f64,
    pub mutually_consistent: bool,
    pub verdict: Verdict,
    pub ladder: Option<LadderReport>,
    pub samples_used: usize,
    pub note: String,
    #[serde(skip)]
    pub runtime_ms: u128,
}

impl IntegralReport {
    pub fn max_closed_form_error(&self) -> Option<f64> {
        self.probes.iter().filter_map(|p| p.closed_form_error()).reduce(f64::max)
    }
}

/// (max − min)/mean of the ratios and whether all pairs agree within 3
/// combined standard errors, plus a roundoff floor.
pub fn ratio_agreement(probes: &[ProbeRatio]) -> (f64, bool) {
    let vals: Vec<f64> = probes.iter().map(|p| p.ratio).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut mutual = true;
    for a in 0..probes.len() {
        for b in (a + 1)..probes.len() {
            let gap = (probes[a].ratio - probes[b].ratio).abs();
            let floor = 1e-9 * mean.abs();
            if gap > 3.0 * probes[a].stderr.hypot(probes[b].stderr) + floor {
                mutual = false;
            }
        }
    }
    ((max - min) / mean.abs(), mutual && vals.iter().all(|v| v.is_finite()))
}

struct ReportBuilder {
    identity: String,
    params: BTreeMap<String, Vec<String>>,
    start: Instant,
}

impl ReportBuilder {
    fn new(identity: &str) -> ReportBuilder {
        ReportBuilder { identity: identity.into(), params: BTreeMap::new(), start: Instant::now() }
    }

    fn param(mut self, name: &str, w: &WeightVector) -> ReportBuilder {
        self.params.insert(name.into(), w.to_strings());
        self
    }

    fn finish(self, probes: Vec<ProbeRatio>, tol: f64, samples: usize, note: String) -> IntegralReport {
        let (spread, mutual) = ratio_agreement(&probes);
        let verdict = if mutual && spread < tol { Verdict::Consistent } else { Verdict::Inconsistent };
        IntegralReport {
            identity: self.identity,
            params: self.params,
            probes,
            spread,
            tolerance: tol,
            mutually_consistent: mutual,
            verdict,
            ladder: None,
            samples_used: samples,
            note,
            runtime_ms: self.start.elapsed().as_millis(),
        }
    }

    fn divergent(self, ladder: LadderReport, samples: usize, note: String) -> IntegralReport {
        let verdict = if ladder.divergent { Verdict::Divergent } else { Verdict::Inconsistent };
        IntegralReport {
            identity: self.identity,
            params: self.params,
            probes: Vec::new(),
            spread: f64::NAN,
            tolerance: 0.0,
            mutually_consistent: false,
            verdict,
            ladder: Some(ladder),
            samples_used: samples,
            note,
            runtime_ms: self.start.elapsed().as_millis(),
        }
    }
}

fn check_rank(cone: &ConeSpec, w: &WeightVector) -> Result<()> {
    if w.len() != cone.rank() {
        return Err(Error::LengthMismatch { expected: cone.rank(), got: w.len() });
    }
    Ok(())
}

/// Student-t proposal for σ_j when the σ_j-marginal is close to
/// exp(2a·σ − d·e^{2σ}), a log-gamma law.
pub(crate) fn log_gamma_proposal(a: f64, d: f64) -> Coord1D {
    let a = a.max(0.05);
    let loc = 0.5 * (a / d).ln();
    let scale = (0.6 * trigamma(a).sqrt()).max(0.35);
    Coord1D::Student { loc, scale, df: 3.0 }
}

/// Q-box ladder for a primal or dual cone integral, probe fixed.
fn cone_box_ladder<F>(base: &ConeSampler, log_f: F, cfg: &QuadConfig) -> LadderReport
where
    F: Fn(&super::ChartSample) -> f64 + Sync + Send,
{
    let r = base.chart.rank();
    let (lo, hi) = cfg.ladder_levels;
    let half = |k: u32| k as f64 * std::f64::consts::LN_2 / 2.0;
    let mut levels = Vec::new();
    let mut shells = Vec::new();
    for k in lo..=hi {
        let w = half(k);
        let mut s = base.clone();
        s.transport = None;
        s.sigma = vec![Coord1D::Uniform { lo: -w, hi: w }; r];
        if k > lo {
            let inner = half(k - 1);
            s = s.with_exclusion(vec![(-inner, inner); r]);
        }
        let seed = cfg.seed.wrapping_add(1000 + k as u64);
        shells.push(integrate_cone(&s, &log_f, cfg.ladder_samples, seed));
        levels.push(k as f64);
    }
    judge_ladder(levels, shells, &cfg.rule)
}

fn integ_sampler(cone: &Arc<ConeSpec>, nu: &[f64]) -> ConeSampler {
    let m = cone.m();
    let sigma = (0..cone.rank())
        .map(|j| log_gamma_proposal(nu[j] - m[j] as f64 / 2.0, cone.block_dims()[j] as f64))
        .collect();
    ConeSampler::new(cone, Side::Primal, sigma).with_off(4.0, OffScale::Fixed(0.8))
}

/// ∫_Ω e^{−(ξ|y)} Q^{ν−τ}(y) dy / (Q*)^{−ν}(ξ) across dual probes ξ.
pub fn verify_integ(
    cone: &Arc<ConeSpec>,
    nu: &WeightVector,
    probes: &[ConeElement],
    cfg: &QuadConfig,
) -> Result<IntegralReport> {
    check_rank(cone, nu)?;
    let builder = ReportBuilder::new("integ").param("nu", nu);
    let nu_f = nu.to_f64();
    let tau = cone.tau();
    let m = cone.m();
    let weights = cfg.pairing.block_weights(cone);
    let exponent: Vec<f64> = nu_f.iter().zip(&tau).map(|(n, t)| 2.0 * (n - t)).collect();
    let base = integ_sampler(cone, &nu_f);
    let inside = (0..cone.rank()).all(|j| nu_f[j] > m[j] as f64 / 2.0);
    if !inside {
        let e = cone.identity();
        let f = |s: &super::ChartSample| {
            -pair_matrices(cone, &s.point, &e, &weights)
                + s.sigma.iter().zip(&exponent).map(|(a, b)| a * b).sum::<f64>()
        };
        let ladder = cone_box_ladder(&base, f, cfg);
        let used = ladder.shells.iter().map(|s| s.samples).sum();
        return Ok(builder.divergent(ladder, used, "nu_j <= m_j/2 for some j".into()));
    }
    let closed = if cone.rank() == 1 { Some(gamma(nu_f[0])) } else { None };
    let mut out = Vec::new();
    let mut used = 0;
    for (idx, xi) in probes.iter().enumerate() {
        let s = cholesky_dual(xi)?;
        let qs: Vec<f64> = s.rho.iter().map(|v| v * v).collect();
        let sampler = base.clone().with_transport(s.t.upper_triangular_inverse());
        let xi_m = xi.embedded;
        let est = integrate_cone(
            &sampler,
            |p| {
                -pair_matrices(cone, &p.point, &xi_m, &weights)
                    + p.sigma.iter().zip(&exponent).map(|(a, b)| a * b).sum::<f64>()
            },
            cfg.samples,
            cfg.seed.wrapping_add(idx as u64),
        );
        used += est.samples;
        let scale = log_power_f(&nu_f, &qs).exp();
        out.push(ProbeRatio {
            probe: xi.coords.clone(),
            ratio: est.value * scale,
            stderr: est.stderr * scale,
            closed_form: closed,
        });
    }
    Ok(builder.finish(out, cfg.tolerance, used, format!("pairing {}", cfg.pairing.label())))
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaReport {
    pub value: Estimate,
    /// π^{(n−r)/2}·J₀/2^r·Π Γ(ν_j − m_j/2)·d_j^{−(ν_j − m_j/2)}, exact for the
    /// matrix-trace pairing in basis coordinates.
    pub closed_form: f64,
    /// (2π)^{(n−r)/2}·Π Γ(ν_j − m_j/2); reported for comparison only.
    pub factorized_hypothesis: f64,
}

/// Γ_Ω(ν) = ∫_Ω e^{−(e|y)} Q^{ν−τ}(y) dy.
pub fn gamma_omega(cone: &Arc<ConeSpec>, nu: &WeightVector, samples: usize, seed: u64) -> Result<GammaReport> {
    check_rank(cone, nu)?;
    let cfg = QuadConfig::default().with_samples(samples).with_seed(seed);
    let e = ConeElement::identity(cone, Side::Dual);
    let rep = verify_integ(cone, nu, std::slice::from_ref(&e), &cfg)?;
    if rep.verdict == Verdict::Divergent || rep.probes.is_empty() {
        let why = rep.ladder.map(|l| l.reason).unwrap_or_default();
        return Err(Error::DivergenceDetected(format!("nu outside nu_j > m_j/2 ({why})")));
    }
    let p = &rep.probes[0];
    let nu_f = nu.to_f64();
    let m = cone.m();
    let n = cone.dim() as f64;
    let r = cone.rank() as f64;
    let chart = crate::chart::HaarChart::new(cone, Side::Primal);
    let mut closed = PI.powf((n - r) / 2.0) * (chart.log_j0().exp() / 2f64.powf(r));
    let mut hyp = (2.0 * PI).powf((n - r) / 2.0);
    for j in 0..cone.rank() {
        let a = nu_f[j] - m[j] as f64 / 2.0;
        let d = cone.block_dims()[j] as f64;
        closed *= (ln_gamma(a) - a * d.ln()).exp();
        hyp *= gamma(a);
    }
    Ok(GammaReport {
        value: Estimate { value: p.ratio, stderr: p.stderr, samples: rep.samples_used },
        closed_form: closed,
        factorized_hypothesis: hyp,
    })
}

/// ∫_Ω Q^μ(y+v) Q^{ν−τ}(y) dy / Q^{μ+ν}(v) across probes v ∈ Ω.
pub fn verify_beta(
    cone: &Arc<ConeSpec>,
    mu: &WeightVector,
    nu: &WeightVector,
    probes: &[ConeElement],
    cfg: &QuadConfig,
) -> Result<IntegralReport> {
    check_rank(cone, mu)?;
    check_rank(cone, nu)?;
    let builder = ReportBuilder::new("beta").param("mu", mu).param("nu", nu);
    let (mu_f, nu_f) = (mu.to_f64(), nu.to_f64());
    let tau = cone.tau();
    let (m, nc) = (cone.m(), cone.n_col());
    let exponent: Vec<f64> = nu_f.iter().zip(&tau).map(|(n, t)| 2.0 * (n - t)).collect();
    let sigma = (0..cone.rank()).map(|_| Coord1D::Student { loc: 0.0, scale: 1.2, df: 3.0 }).collect();
    let base = ConeSampler::new(cone, Side::Primal, sigma).with_off(3.0, OffScale::Adaptive(0.7));
    let log_f = |v: &Mat| {
        let mu_f = mu_f.clone();
        let exponent = exponent.clone();
        let v = *v;
        move |p: &super::ChartSample| match cone.q_values(&p.point.add(&v)) {
            Ok(qv) => log_power_f(&mu_f, &qv) + p.sigma.iter().zip(&exponent).map(|(a, b)| a * b).sum::<f64>(),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let inside = (0..cone.rank())
        .all(|j| nu_f[j] > m[j] as f64 / 2.0 && mu_f[j] + nu_f[j] < -(nc[j] as f64) / 2.0);
    if !inside {
        let ladder = cone_box_ladder(&base, log_f(&cone.identity()), cfg);
        let used = ladder.shells.iter().map(|s| s.samples).sum();
        return Ok(builder.divergent(ladder, used, "outside nu_j > m_j/2, mu_j+nu_j < -n_j/2".into()));
    }
    let closed = if cone.rank() == 1 {
        let (a, b) = (nu_f[0], -mu_f[0] - nu_f[0]);
        Some((ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp())
    } else {
        None
    };
    let mut out = Vec::new();
    let mut used = 0;
    for (idx, v) in probes.iter().enumerate() {
        let t = cholesky_upper(v)?;
        let qv: Vec<f64> = t.rho.iter().map(|x| x * x).collect();
        let sampler = base.clone().with_transport(t.t);
        let est = integrate_cone(&sampler, log_f(&v.embedded), cfg.samples, cfg.seed.wrapping_add(idx as u64));
        used += est.samples;
        let sum: Vec<f64> = mu_f.iter().zip(&nu_f).map(|(a, b)| a + b).collect();
        let scale = (-log_power_f(&sum, &qv)).exp();
        out.push(ProbeRatio {
            probe: v.coords.clone(),
            ratio: est.value * scale,
            stderr: est.stderr * scale,
            closed_form: closed,
        });
    }
    Ok(builder.finish(out, cfg.tolerance, used, String::new()))
}

/// ln |Q^{−α}(y − i·x)| for embedded y, x.
fn log_abs_q_complex(cone: &ConeSpec, alpha: &[f64], y: &Mat, x: &Mat) -> f64 {
    match cone.q_complex(y, &x.scale(-1.0)) {
        Ok(q) => -q.iter().zip(alpha).map(|(c, a)| a * c.norm().ln()).sum::<f64>(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// J_α(y) = ∫_V |Q^{−α}(y − i·x)| dx / Q^{−α+τ}(y) across probes y ∈ Ω.
pub fn verify_j_alpha(
    cone: &Arc<ConeSpec>,
    alpha: &WeightVector,
    probes: &[ConeElement],
    cfg: &QuadConfig,
) -> Result<IntegralReport> {
    check_rank(cone, alpha)?;
    let builder = ReportBuilder::new("J_alpha").param("alpha", alpha);
    let a = alpha.to_f64();
    let (m, nc) = (cone.m(), cone.n_col());
    let n = cone.dim();
    let tau = cone.tau();
    let inside = (0..cone.rank()).all(|j| a[j] > 1.0 + nc[j] as f64 + m[j] as f64 / 2.0);
    if !inside {
        let e = cone.identity();
        let (lo, hi) = cfg.ladder_levels;
        let mut levels = Vec::new();
        let mut shells = Vec::new();
        for k in lo..=hi {
            let r_out = 2f64.powi(k as i32);
            let r_in = if k == lo { 0.0 } else { 2f64.powi(k as i32 - 1) };
            let est = mc_mean(cfg.ladder_samples, cfg.seed.wrapping_add(1000 + k as u64), |rng| {
                let (x, lp) = draw_annulus(rng, n, r_in, r_out);
                (log_abs_q_complex(cone, &a, &e, &cone.embed(&x)) - lp).exp()
            });
            levels.push(k as f64);
            shells.push(est);
        }
        let ladder = judge_ladder(levels, shells, &cfg.rule);
        let used = ladder.shells.iter().map(|s| s.samples).sum();
        return Ok(builder.divergent(ladder, used, "alpha_j <= 1 + n_j + m_j/2 for some j".into()));
    }
    let closed = if cone.rank() == 1 {
        Some(PI.sqrt() * (ln_gamma((a[0] - 1.0) / 2.0) - ln_gamma(a[0] / 2.0)).exp())
    } else {
        None
    };
    let proposal = MultiT { center: vec![0.0; n], scale: 1.0, df: 1.0 };
    let mut out = Vec::new();
    let mut used = 0;
    for (idx, y) in probes.iter().enumerate() {
        let t = cholesky_upper(y)?;
        let qy: Vec<f64> = t.rho.iter().map(|v| v * v).collect();
        // x = π(t)x′, dx = Q^τ(y) dx′
        let log_det = log_power_f(&tau, &qy);
        let ym = y.embedded;
        let est = mc_mean(cfg.samples, cfg.seed.wrapping_add(idx as u64), |rng| {
            let (xp, lp) = proposal.draw(rng);
            let x = t.t.congruence(&cone.embed(&xp));
            (log_abs_q_complex(cone, &a, &ym, &x) + log_det - lp).exp()
        });
        used += est.samples;
        let shape: Vec<f64> = a.iter().zip(&tau).map(|(x, t)| t - x).collect();
        let scale = (-log_power_f(&shape, &qy)).exp();
        out.push(ProbeRatio {
            probe: y.coords.clone(),
            ratio: est.value * scale,
            stderr: est.stderr * scale,
            closed_form: closed,
        });
    }
    Ok(builder.finish(out, cfg.tolerance, used, String::new()))
}

/// Truncated J_α over ‖x‖ < 1 at points y near the vertex, divided by
/// Q^{−α+τ}(y). Consistent when the ratios agree within a factor of 2.
pub fn verify_j_alpha_lower(
    cone: &Arc<ConeSpec>,
    alpha: &WeightVector,
    probes: &[ConeElement],
    cfg: &QuadConfig,
) -> Result<IntegralReport> {
    check_rank(cone, alpha)?;
    let builder = ReportBuilder::new("J_alpha_lower").param("alpha", alpha);
    let a = alpha.to_f64();
    let n = cone.dim();
    let tau = cone.tau();
    let mut out = Vec::new();
    let mut used = 0;
    for (idx, y) in probes.iter().enumerate() {
        let eig = y.embedded.symmetric_eigenvalues();
        let top = *eig.last().unwrap();
        if top >= 0.25 {
            return Err(Error::Precondition(format!("probe norm {top} is not below 1/4")));
        }
        let qy = crate::cone_algebra::q(y)?;
        let proposal = MultiT { center: vec![0.0; n], scale: top, df: 1.0 };
        let ym = y.embedded;
        let est = mc_mean(cfg.samples, cfg.seed.wrapping_add(idx as u64), |rng| {
            let (x, lp) = proposal.draw(rng);
            if x.iter().map(|v| v * v).sum::<f64>() >= 1.0 {
                return 0.0;
            }
            (log_abs_q_complex(cone, &a, &ym, &cone.embed(&x)) - lp).exp()
        });
        used += est.samples;
        let shape: Vec<f64> = a.iter().zip(&tau).map(|(x, t)| t - x).collect();
        let scale = (-log_power_f(&shape, &qy)).exp();
        let closed = if cone.rank() == 1 { Some(2.0 * (1.0 / y.coords[0]).atan()) } else { None };
        out.push(ProbeRatio {
            probe: y.coords.clone(),
            ratio: est.value * scale,
            stderr: est.stderr * scale,
            closed_form: closed,
        });
    }
    let mut rep = builder.finish(out, cfg.tolerance, used, "lower bound: ratios stable within a factor of 2".into());
    let vals: Vec<f64> = rep.probes.iter().map(|p| p.ratio).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    rep.verdict = if lo > 0.0 && hi / lo <= 2.0 { Verdict::Consistent } else { Verdict::Inconsistent };
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub candidates: Vec<(String, f64, Verdict)>,
    pub chosen: Pairing,
}

/// Picks the diagonal-block pairing weights under which the Gamma identity
/// has the smallest ratio spread.
pub fn calibrate_pairing(
    cone: &Arc<ConeSpec>,
    nu: &WeightVector,
    probes: &[ConeElement],
    cfg: &QuadConfig,
) -> Result<CalibrationReport> {
    let mut best: Option<(f64, Pairing)> = None;
    let mut candidates = Vec::new();
    for pairing in [Pairing::Unit, Pairing::TAlgebra] {
        let mut c = cfg.clone();
        c.pairing = pairing.clone();
        let rep = verify_integ(cone, nu, probes, &c)?;
        candidates.push((pairing.label(), rep.spread, rep.verdict));
        if best.as_ref().is_none_or(|(s, _)| rep.spread < *s) {
            best = Some((rep.spread, pairing));
        }
    }
    Ok(CalibrationReport { candidates, chosen: best.unwrap().1 })
}
