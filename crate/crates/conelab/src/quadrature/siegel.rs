//! Ω-Hermitian forms F on C^m and the Siegel-domain integrals built from them.

use super::verify::{ratio_agreement, IntegralReport, ProbeRatio, QuadConfig, Verdict};
use super::{draw_annulus, judge_ladder, mc_mean, MultiT};
use crate::cone_algebra::{log_power_f, pair_matrices, ConeElement, ConeSpec, Side};
use crate::error::{Error, Result};
use crate::weights::WeightVector;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use statrs::function::gamma::ln_gamma;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

/// F(u, v) = Σ_k (u·H_k·v̄ᵀ) E_k over the basis E_k of the cone's space.
#[derive(Clone, Debug)]
pub struct SiegelData {
    pub cone: Arc<ConeSpec>,
    pub m: usize,
    pub b: WeightVector,
    pub h_forms: Vec<DMatrix<Complex64>>,
}

impl SiegelData {
    pub fn new(cone: &Arc<ConeSpec>, m: usize, b: WeightVector, h_forms: Vec<DMatrix<Complex64>>) -> Result<SiegelData> {
        if h_forms.len() != cone.dim() {
            return Err(Error::LengthMismatch { expected: cone.dim(), got: h_forms.len() });
        }
        if b.len() != cone.rank() {
            return Err(Error::LengthMismatch { expected: cone.rank(), got: b.len() });
        }
        for h in &h_forms {
            if h.nrows() != m || h.ncols() != m {
                return Err(Error::InvalidSpec(format!("form is {}x{}, expected {m}x{m}", h.nrows(), h.ncols())));
            }
            if (h - h.adjoint()).iter().any(|c| c.norm() > 1e-12) {
                return Err(Error::InvalidSpec("form is not Hermitian".into()));
            }
        }
        let sd = SiegelData { cone: cone.clone(), m, b, h_forms };
        sd.check_positivity()?;
        Ok(sd)
    }

    /// m = 0: the tube domain over the cone.
    pub fn tube(cone: &Arc<ConeSpec>) -> SiegelData {
        SiegelData { cone: cone.clone(), m: 0, b: WeightVector::zeros(cone.rank()), h_forms: vec![DMatrix::zeros(0, 0); cone.dim()] }
    }

    /// Half-line cone with F(u, v) = Σ u_i v̄_i on C^m and b = (m).
    pub fn halfline(m: usize) -> Result<SiegelData> {
        let cone = crate::cone_algebra::builtin_cone("halfline")?;
        let b = WeightVector::exact(vec![crate::rational::int(m as i64)]);
        SiegelData::new(&cone, m, b, vec![DMatrix::identity(m, m)])
    }

    /// Coordinates of F(u, v); complex in general.
    pub fn form(&self, u: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
        self.h_forms
            .iter()
            .map(|h| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..self.m {
                    for j in 0..self.m {
                        acc += u[i] * h[(i, j)] * v[j].conj();
                    }
                }
                acc
            })
            .collect()
    }

    pub fn form_real(&self, u: &[Complex64]) -> Vec<f64> {
        self.form(u, u).iter().map(|c| c.re).collect()
    }

    /// F(u,u) ∈ closure(Ω) on random u, and F(u,u) ≠ 0 on a grid of u ≠ 0.
    fn check_positivity(&self) -> Result<()> {
        if self.m == 0 {
            return Ok(());
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let cauchy = MultiT { center: vec![0.0; 2 * self.m], scale: 1.0, df: 3.0 };
        for _ in 0..200 {
            let (x, _) = cauchy.draw(&mut rng);
            let u = to_complex(&x);
            let f = self.cone.embed(&self.form_real(&u));
            let norm = u.iter().map(|c| c.norm_sqr()).sum::<f64>();
            if f.symmetric_eigenvalues()[0] < -1e-10 * norm {
                return Err(Error::InvalidSpec("F(u,u) leaves the closed cone".into()));
            }
        }
        let steps = [0.0, 1.0, -1.0];
        let total = 9usize.pow(self.m.min(3) as u32);
        for idx in 1..total {
            let mut u = vec![Complex64::new(0.0, 0.0); self.m];
            let mut rest = idx;
            for c in u.iter_mut().take(self.m.min(3)) {
                *c = Complex64::new(steps[rest % 3], steps[(rest / 3) % 3]);
                rest /= 9;
            }
            if self.form_real(&u).iter().all(|v| v.abs() < 1e-12) {
                return Err(Error::InvalidSpec("F(u,u) = 0 for some u != 0".into()));
            }
        }
        Ok(())
    }
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn report(identity: &str, params: BTreeMap<String, Vec<String>>, probes: Vec<ProbeRatio>, cfg: &QuadConfig, used: usize, start: Instant) -> IntegralReport {
    let (spread, mutual) = ratio_agreement(&probes);
    let verdict = if mutual && spread < cfg.tolerance { Verdict::Consistent } else { Verdict::Inconsistent };
    IntegralReport {
        identity: identity.into(),
        params,
        probes,
        spread,
        tolerance: cfg.tolerance,
        mutually_consistent: mutual,
        verdict,
        ladder: None,
        samples_used: used,
        note: String::new(),
        runtime_ms: start.elapsed().as_millis(),
    }
}

/// ∫_{C^m} e^{−(F(u,u)|ξ)} dv(u) / (Q*)^{−b}(ξ) across dual probes ξ.
pub fn verify_hermitian_form(sd: &SiegelData, probes: &[ConeElement], cfg: &QuadConfig) -> Result<IntegralReport> {
    let start = Instant::now();
    let cone = &sd.cone;
    let weights = cfg.pairing.block_weights(cone);
    let b = sd.b.to_f64();
    let mut params = BTreeMap::new();
    params.insert("b".to_string(), sd.b.to_strings());
    params.insert("m".to_string(), vec![sd.m.to_string()]);
    let mut out = Vec::new();
    let mut used = 0;
    for (idx, xi) in probes.iter().enumerate() {
        if xi.side != Side::Dual {
            return Err(Error::InvalidSpec("probe must be a dual-cone point".into()));
        }
        let qs = match crate::cone_algebra::qstar(xi) {
            Ok(qs) => qs,
            Err(_) if sd.m > 0 => return Ok(form_ladder(sd, xi, params, cfg, &weights, start)),
            Err(e) => return Err(e),
        };
        let scale = log_power_f(&b, &qs).exp();
        let closed = if cone.rank() == 1 && sd.m > 0 {
            let det = sd.h_forms[0].map(|c| c.re).determinant();
            Some(PI.powi(sd.m as i32) / (xi.coords[0].powi(sd.m as i32) * det) * scale)
        } else {
            None
        };
        let (value, stderr, samples) = if sd.m == 0 {
            (1.0, 0.0, 0)
        } else {
            let width = 1.0 / xi.embedded.symmetric_eigenvalues()[0].sqrt();
            let proposal = MultiT { center: vec![0.0; 2 * sd.m], scale: width, df: 5.0 };
            let xi_m = xi.embedded;
            let est = mc_mean(cfg.samples, cfg.seed.wrapping_add(idx as u64), |rng| {
                let (x, lp) = proposal.draw(rng);
                let f = cone.embed(&sd.form_real(&to_complex(&x)));
                (-pair_matrices(cone, &f, &xi_m, &weights) - lp).exp()
            });
            (est.value, est.stderr, est.samples)
        };
        used += samples;
        out.push(ProbeRatio { probe: xi.coords.clone(), ratio: value * scale, stderr: stderr * scale, closed_form: closed });
    }
    Ok(report("hermitian_form", params, out, cfg, used, start))
}

/// ξ outside the open dual cone: annulus ladder for ∫ e^{−(F(u,u)|ξ)} dv(u).
fn form_ladder(sd: &SiegelData, xi: &ConeElement, params: BTreeMap<String, Vec<String>>, cfg: &QuadConfig, weights: &[f64], start: Instant) -> IntegralReport {
    let (lo, hi) = cfg.ladder_levels;
    let mut levels = Vec::new();
    let mut shells = Vec::new();
    for k in lo..=hi {
        let r_out = 2f64.powi(k as i32);
        let r_in = if k == lo { 0.0 } else { 2f64.powi(k as i32 - 1) };
        shells.push(mc_mean(cfg.ladder_samples, cfg.seed.wrapping_add(1000 + k as u64), |rng| {
            let (x, lp) = draw_annulus(rng, 2 * sd.m, r_in, r_out);
            let f = sd.cone.embed(&sd.form_real(&to_complex(&x)));
            (-pair_matrices(&sd.cone, &f, &xi.embedded, weights) - lp).exp()
        }));
        levels.push(k as f64);
    }
    let ladder = judge_ladder(levels, shells, &cfg.rule);
    let used = ladder.shells.iter().map(|s| s.samples).sum();
    let mut rep = report("hermitian_form", params, Vec::new(), cfg, used, start);
    rep.verdict = if ladder.divergent { Verdict::Divergent } else { Verdict::Inconsistent };
    rep.spread = f64::NAN;
    rep.note = "probe outside the open dual cone".into();
    rep.ladder = Some(ladder);
    rep
}

/// A point (y, u) of the Siegel domain's base.
#[derive(Clone, Debug)]
pub struct SiegelProbe {
    pub y: Vec<f64>,
    pub u: Vec<Complex64>,
}

/// ln Q^{−λ}(y + F(s,s) − 2 Re F(u,s)).
fn log_kernel(sd: &SiegelData, lambda: &[f64], y: &[f64], u: &[Complex64], s: &[Complex64]) -> f64 {
    let fss = sd.form_real(s);
    let fus = sd.form(u, s);
    let coords: Vec<f64> = (0..y.len()).map(|k| y[k] + fss[k] - 2.0 * fus[k].re).collect();
    match sd.cone.q_values(&sd.cone.embed(&coords)) {
        Ok(q) => -log_power_f(lambda, &q),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// I_λ(y,u) = ∫_{C^m} Q^{−λ}(y + F(s,s) − 2 Re F(u,s)) dv(s), divided by
/// Q^{−λ+b}(y − F(u,u)).
pub fn verify_siegel_integral(sd: &SiegelData, lambda: &WeightVector, probes: &[SiegelProbe], cfg: &QuadConfig) -> Result<IntegralReport> {
    let start = Instant::now();
    let cone = &sd.cone;
    if lambda.len() != cone.rank() {
        return Err(Error::LengthMismatch { expected: cone.rank(), got: lambda.len() });
    }
    if sd.m == 0 {
        return Err(Error::Precondition("the integral needs m > 0".into()));
    }
    let lam = lambda.to_f64();
    let b = sd.b.to_f64();
    let nc = cone.n_col();
    let mut params = BTreeMap::new();
    params.insert("lambda".to_string(), lambda.to_strings());
    params.insert("b".to_string(), sd.b.to_strings());
    let d = 2 * sd.m;
    let inside = (0..cone.rank()).all(|j| lam[j] - b[j] > nc[j] as f64 / 2.0);
    if !inside {
        let y = cone.coords(&cone.identity());
        let zero = vec![Complex64::new(0.0, 0.0); sd.m];
        let (lo, hi) = cfg.ladder_levels;
        let mut levels = Vec::new();
        let mut shells = Vec::new();
        for k in lo..=hi {
            let r_out = 2f64.powi(k as i32);
            let r_in = if k == lo { 0.0 } else { 2f64.powi(k as i32 - 1) };
            shells.push(mc_mean(cfg.ladder_samples, cfg.seed.wrapping_add(1000 + k as u64), |rng| {
                let (x, lp) = draw_annulus(rng, d, r_in, r_out);
                (log_kernel(sd, &lam, &y, &zero, &to_complex(&x)) - lp).exp()
            }));
            levels.push(k as f64);
        }
        let ladder = judge_ladder(levels, shells, &cfg.rule);
        let used = ladder.shells.iter().map(|s| s.samples).sum();
        let mut rep = report("siegel_integral", params, Vec::new(), cfg, used, start);
        rep.verdict = if ladder.divergent { Verdict::Divergent } else { Verdict::Inconsistent };
        rep.spread = f64::NAN;
        rep.note = "lambda_j - b_j <= n_j/2 for some j".into();
        rep.ladder = Some(ladder);
        return Ok(rep);
    }
    let shape: Vec<f64> = b.iter().zip(&lam).map(|(b, l)| b - l).collect();
    let mut out = Vec::new();
    let mut used = 0;
    for (idx, p) in probes.iter().enumerate() {
        let fuu = sd.form_real(&p.u);
        let base: Vec<f64> = p.y.iter().zip(&fuu).map(|(a, f)| a - f).collect();
        let base_el = ConeElement::from_coords(cone, base, Side::Primal)?;
        base_el.ensure_interior()?;
        let qb = crate::cone_algebra::q(&base_el)?;
        let width = base_el.embedded.symmetric_eigenvalues()[0].sqrt();
        let mut center = Vec::with_capacity(d);
        for c in &p.u {
            center.push(c.re);
            center.push(c.im);
        }
        let proposal = MultiT { center, scale: width, df: 1.0 };
        let est = mc_mean(cfg.samples, cfg.seed.wrapping_add(idx as u64), |rng| {
            let (x, lp) = proposal.draw(rng);
            (log_kernel(sd, &lam, &p.y, &p.u, &to_complex(&x)) - lp).exp()
        });
        used += est.samples;
        let scale = (-log_power_f(&shape, &qb)).exp();
        let closed = if cone.rank() == 1 && sd.h_forms[0] == DMatrix::identity(sd.m, sd.m) {
            let mf = sd.m as f64;
            Some((mf * PI.ln() + ln_gamma(lam[0] - mf) - ln_gamma(lam[0])).exp() * qb[0].powf(mf - b[0]))
        } else {
            None
        };
        let mut probe = p.y.clone();
        for c in &p.u {
            probe.push(c.re);
            probe.push(c.im);
        }
        out.push(ProbeRatio { probe, ratio: est.value * scale, stderr: est.stderr * scale, closed_form: closed });
    }
    Ok(report("siegel_integral", params, out, cfg, used, start))
}
