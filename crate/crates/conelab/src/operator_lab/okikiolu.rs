//! Okikiolu-test parameters (t_j, u_j, v_j) and their numerical verification.
//!
//! With ω_j = −(A_j + B_j), A_j = (ν_j+b_j/2)/q′, B_j = (μ_j+b_j/2)/s, the
//! gap v_j − u_j = t_j(A_j+B_j) − A_j is affine in t_j, and so is every bound
//! on u_j and v_j. Feasibility of one block is therefore a one-dimensional
//! linear program in t_j, decided exactly.

use super::{assemble_s, norm_estimate, NormConfig};
use crate::cone_algebra::{cholesky_upper, log_power_f, ConeElement, ConeSpec, Side};
use crate::error::{Error, Result};
use crate::geometry::Lattice;
use crate::indices::{ser_rats, ParamSet};
use crate::quadrature::{integrate_cone, ChartSample, ConeSampler, Coord1D, Estimate, OffScale};
use crate::rational::{conjugate, format_rat, int, rat, to_f64, Rat};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize)]
pub struct OkikioluParams {
    #[serde(serialize_with = "ser_rats")]
    pub t: Vec<Rat>,
    #[serde(serialize_with = "ser_rats")]
    pub u: Vec<Rat>,
    #[serde(serialize_with = "ser_rats")]
    pub v: Vec<Rat>,
    #[serde(serialize_with = "ser_rats")]
    pub omega: Vec<Rat>,
    pub feasible: bool,
    /// Why no parameters exist, when infeasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
}

impl OkikioluParams {
    fn infeasible(omega: Vec<Rat>, witness: String) -> OkikioluParams {
        OkikioluParams { t: vec![], u: vec![], v: vec![], omega, feasible: false, witness: Some(witness), m1: None, m2: None }
    }
}

/// a + b·t
#[derive(Clone, Debug)]
struct Line {
    a: Rat,
    b: Rat,
    label: &'static str,
}

impl Line {
    fn at(&self, t: &Rat) -> Rat {
        &self.a + &self.b * t
    }
}

fn line(a: Rat, b: Rat, label: &'static str) -> Line {
    Line { a, b, label }
}

struct BlockProgram {
    lower: Vec<Line>,
    upper: Vec<Line>,
    /// v − u as a function of t.
    gap: Line,
}

impl BlockProgram {
    fn bounds(&self, t: &Rat) -> (Rat, &'static str, Rat, &'static str) {
        let lo = self.lower.iter().map(|l| (l.at(t), l.label)).max_by(|a, b| a.0.cmp(&b.0)).unwrap();
        let hi = self.upper.iter().map(|l| (l.at(t), l.label)).min_by(|a, b| a.0.cmp(&b.0)).unwrap();
        (lo.0, lo.1, hi.0, hi.1)
    }

    fn width(&self, t: &Rat) -> Rat {
        let (lo, _, hi, _) = self.bounds(t);
        hi - lo
    }

    /// Maximizer of the (concave, piecewise affine) width on [0, 1].
    fn best_t(&self) -> (Rat, Rat) {
        let all: Vec<&Line> = self.lower.iter().chain(&self.upper).collect();
        let mut cands = vec![Rat::zero(), Rat::one()];
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                if a.b != b.b {
                    let t = (&b.a - &a.a) / (&a.b - &b.b);
                    if t > Rat::zero() && t < Rat::one() {
                        cands.push(t);
                    }
                }
            }
        }
        cands.into_iter().map(|t| (self.width(&t), t)).max_by(|a, b| a.0.cmp(&b.0)).map(|(w, t)| (t, w)).unwrap()
    }
}

fn block_program(cone: &ConeSpec, ps: &ParamSet, j: usize) -> BlockProgram {
    let (m, n, tau) = (&cone.m_exact()[j], &cone.n_exact()[j], &cone.tau_exact()[j]);
    let half = rat(1, 2);
    let (al, be, ga, nu, mu) = (&ps.alpha[j], &ps.beta[j], &ps.gamma[j], &ps.nu[j], &ps.mu[j]);
    let bh = &ps.b[j] * &half;
    let q_conj = conjugate(&ps.q).finite().cloned().expect("q > 1");
    let s = &ps.s;
    let a_ = (nu + &bh) / &q_conj;
    let b_ = (mu + &bh) / s;
    let gap = line(-a_.clone(), &a_ + &b_, "v-u");
    let p = be - nu + tau + &bh;
    let d = be - ga - nu + tau;
    let g = ga - al + &bh;
    let c_u = (nu - m * &half - &bh) / &q_conj;
    let c_v = (mu - m * &half - &bh) / s;
    let d_u = (nu + n * &half + &bh) / &q_conj;
    let d_v = (mu + n * &half + &bh) / s;
    // bounds on v become bounds on u after subtracting the gap
    let minus_gap = |l: Line| line(l.a - &gap.a, l.b - &gap.b, l.label);
    BlockProgram {
        lower: vec![
            line(-p.clone(), p.clone(), "first test: lower bound on u"),
            minus_gap(line(Rat::zero(), -al.clone(), "first test: lower bound on v")),
            line(d_u, d.clone(), "second test: lower bound on u"),
            minus_gap(line(d_v - &g, g.clone(), "second test: lower bound on v")),
        ],
        upper: vec![
            line(c_u, p, "first test: upper bound on u"),
            minus_gap(line(c_v + al, -al.clone(), "first test: upper bound on v")),
            line(-d.clone(), d, "second test: upper bound on u"),
            minus_gap(line(Rat::zero(), g, "second test: upper bound on v")),
        ],
        gap,
    }
}

/// Parameters of the Okikiolu test for S_{α,β,γ}: L^q_ν → L^s_μ. Prefers the
/// gap v_j − u_j = B_j/2 and falls back to the widest feasible t_j; u_j is the
/// midpoint of its interval.
pub fn okikiolu_params(cone: &ConeSpec, ps: &ParamSet) -> OkikioluParams {
    let r = cone.rank();
    let half = rat(1, 2);
    let q_conj = conjugate(&ps.q).finite().cloned().expect("q > 1");
    let ab: Vec<(Rat, Rat)> = (0..r)
        .map(|j| {
            let bh = &ps.b[j] * &half;
            ((&ps.nu[j] + &bh) / &q_conj, (&ps.mu[j] + &bh) / &ps.s)
        })
        .collect();
    let omega: Vec<Rat> = ab.iter().map(|(a, b)| -(a + b)).collect();
    if ps.q > ps.s {
        return OkikioluParams::infeasible(omega, format!("q = {} exceeds s = {}", format_rat(&ps.q), format_rat(&ps.s)));
    }
    if let Some(j) = omega.iter().position(|w| !w.is_negative()) {
        let witness = format!("j={}: omega_j = {} is not negative", j + 1, format_rat(&omega[j]));
        return OkikioluParams::infeasible(omega, witness);
    }
    let balanced = ps.balanced_gamma(cone);
    if let Some(j) = (0..r).find(|&j| ps.gamma[j] != balanced[j]) {
        return OkikioluParams::infeasible(
            omega,
            format!("j={}: gamma_j = {} but balance requires {}", j + 1, format_rat(&ps.gamma[j]), format_rat(&balanced[j])),
        );
    }
    let (mut t, mut u, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..r {
        let prog = block_program(cone, ps, j);
        let (a, b) = &ab[j];
        let preferred = (a + b * &half) / (a + b);
        let chosen = if preferred > Rat::zero() && preferred < Rat::one() && prog.width(&preferred).is_positive() {
            preferred
        } else {
            let (t0, w0) = prog.best_t();
            if !w0.is_positive() {
                let (lo, lo_label, hi, hi_label) = prog.bounds(&t0);
                return OkikioluParams::infeasible(
                    omega,
                    format!(
                        "j={}: {} ({}) is not below {} ({}) at the widest t = {}",
                        j + 1,
                        hi_label,
                        format_rat(&hi),
                        lo_label,
                        format_rat(&lo),
                        format_rat(&t0)
                    ),
                );
            }
            // move toward 1/2 while keeping at least half of the width
            let w_mid = prog.width(&half);
            let step = if w_mid >= Rat::zero() { half.clone() } else { (&w0 / (int(2) * (&w0 - &w_mid))).min(half.clone()) };
            &t0 + step * (&half - &t0)
        };
        let (lo, _, hi, _) = prog.bounds(&chosen);
        let uj = (lo + hi) * &half;
        v.push(&uj + prog.gap.at(&chosen));
        u.push(uj);
        t.push(chosen);
    }
    OkikioluParams { t, u, v, omega, feasible: true, witness: None, m1: None, m2: None }
}

/// A random parameter set near the Bergman family, balanced most of the time.
pub fn random_param_set<R: Rng + ?Sized>(cone: &ConeSpec, rng: &mut R) -> ParamSet {
    let r = cone.rank();
    let tau = cone.tau_exact();
    let m = cone.m_exact();
    let half = rat(1, 2);
    let draw = |rng: &mut R, lo: i64, hi: i64, den: i64| rat(rng.random_range(lo..=hi), den);
    let nu: Vec<Rat> = (0..r).map(|j| &m[j] * &half + draw(rng, 1, 16, 4)).collect();
    let mu: Vec<Rat> = (0..r).map(|j| &m[j] * &half + draw(rng, 1, 16, 4)).collect();
    let alpha: Vec<Rat> = (0..r).map(|_| draw(rng, -4, 4, 4)).collect();
    let beta: Vec<Rat> = (0..r).map(|j| &nu[j] - &tau[j] + draw(rng, -6, 6, 4)).collect();
    let q = int(1) + draw(rng, 1, 12, 4);
    let s = &q + draw(rng, 0, 8, 4);
    let b = vec![Rat::zero(); r];
    let mut ps = ParamSet::new(cone, alpha, beta, vec![Rat::zero(); r], nu, mu, b, (int(2), q, s)).expect("valid exponents");
    ps.gamma = ps.balanced_gamma(cone);
    if rng.random_range(0..10) == 0 {
        let j = rng.random_range(0..r);
        ps.gamma[j] += rat(1, 10);
    }
    ps
}

/// Discrete Okikiolu constants (M₁, M₂) on the lattice of an assembled
/// operator, with counting measures Q^ν(y_k) and Q^μ(y_j). They bound the
/// ℓ^q→ℓ^s norm of the normalized matrix.
pub fn discrete_okikiolu_constants(op: &super::DiscreteOperator, cone: &ConeSpec, ps: &ParamSet, params: &OkikioluParams) -> (f64, f64) {
    let r = cone.rank();
    let n = op.len();
    let f = |v: &[Rat]| v.iter().map(to_f64).collect::<Vec<f64>>();
    let (t, u, v) = (f(&params.t), f(&params.u), f(&params.v));
    let tau = cone.tau();
    let (q, s) = (to_f64(&ps.q), to_f64(&ps.s));
    let q_conj = q / (q - 1.0);
    // ln k_i(j, k) per block
    let log_k = |j: usize, k: usize, i: usize| {
        op.alpha[i] * op.log_q[j][i] - op.gamma[i] * op.log_q_sum[(j * n + k) * r + i]
            + (op.beta[i] - op.nu[i] + tau[i]) * op.log_q[k][i]
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let log_sum = |terms: Vec<f64>| {
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + terms.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
    };
    let mut m2 = f64::NEG_INFINITY;
    for j in 0..n {
        let terms = (0..n)
            .map(|k| {
                (0..r).map(|i| t[i] * q_conj * log_k(j, k, i)).sum::<f64>() - q_conj * dot(&u, &op.log_q[k])
                    + dot(&op.nu, &op.log_q[k])
            })
            .collect();
        m2 = m2.max(log_sum(terms) + q_conj * dot(&v, &op.log_q[j]));
    }
    let mut m1 = f64::NEG_INFINITY;
    for k in 0..n {
        let terms = (0..n)
            .map(|j| {
                (0..r).map(|i| (1.0 - t[i]) * s * log_k(j, k, i)).sum::<f64>() - s * dot(&v, &op.log_q[j])
                    + dot(&op.mu, &op.log_q[j])
            })
            .collect();
        m1 = m1.max(log_sum(terms) + s * dot(&u, &op.log_q[k]));
    }
    ((m1 / s).exp(), (m2 / q_conj).exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteCheck {
    pub m1: f64,
    pub m2: f64,
    pub norm_lower_bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OkikioluReport {
    pub params: OkikioluParams,
    /// I₁(y)/φ₂(y)^{q′} at each probe.
    pub first: Vec<Estimate>,
    /// I₂(x)/φ₁(x)^s at each probe.
    pub second: Vec<Estimate>,
    pub spread_first: f64,
    pub spread_second: f64,
    pub m1: f64,
    pub m2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteCheck>,
}

/// ∫_Ω Q^{−c}(z + w) Q^{d−τ}(w) dw.
fn cone_beta_integral(cone: &Arc<ConeSpec>, z: &ConeElement, c: &[f64], d: &[f64], samples: usize, seed: u64) -> Result<Estimate> {
    let tau = cone.tau();
    let exponent: Vec<f64> = d.iter().zip(&tau).map(|(a, t)| 2.0 * (a - t)).collect();
    let sigma = (0..cone.rank()).map(|_| Coord1D::Student { loc: 0.0, scale: 1.2, df: 3.0 }).collect();
    let tz = cholesky_upper(z)?;
    let sampler = ConeSampler::new(cone, Side::Primal, sigma).with_off(3.0, OffScale::Adaptive(0.7)).with_transport(tz.t);
    let zm = z.embedded;
    let log_f = |p: &ChartSample| match cone.q_values(&p.point.add(&zm)) {
        Ok(qv) => -log_power_f(c, &qv) + p.sigma.iter().zip(&exponent).map(|(a, b)| a * b).sum::<f64>(),
        Err(_) => f64::NEG_INFINITY,
    };
    Ok(integrate_cone(&sampler, log_f, samples, seed))
}

fn spread(est: &[Estimate]) -> f64 {
    let lo = est.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
    let hi = est.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / hi.abs().max(f64::MIN_POSITIVE)
}

/// Integrates I₁ and I₂ of the Okikiolu test at the probes (tube case) and
/// fits M₁, M₂ as the largest observed ratios. With a lattice, also checks the
/// discrete constants against the norm lower bound of the assembled matrix.
pub fn okikiolu_verify(
    cone: &Arc<ConeSpec>,
    ps: &ParamSet,
    params: &OkikioluParams,
    probes: &[ConeElement],
    lattice: Option<&Lattice>,
    samples: usize,
    seed: u64,
) -> Result<OkikioluReport> {
    if !params.feasible {
        return Err(Error::Precondition("Okikiolu parameters are infeasible".into()));
    }
    if ps.b.iter().any(|b| !b.is_zero()) {
        return Err(Error::Precondition("verification is implemented for the tube case b = 0".into()));
    }
    let r = cone.rank();
    let f = |v: &[Rat]| v.iter().map(to_f64).collect::<Vec<f64>>();
    let (t, u, v) = (f(&params.t), f(&params.u), f(&params.v));
    let (al, be, ga, nu, mu) = (f(&ps.alpha), f(&ps.beta), f(&ps.gamma), f(&ps.nu), f(&ps.mu));
    let tau = cone.tau();
    let (q, s) = (to_f64(&ps.q), to_f64(&ps.s));
    let qc = q / (q - 1.0);
    let w: Vec<f64> = (0..r).map(|j| be[j] - nu[j] + tau[j]).collect();
    // I₁(y) = Q^{tq′α}(y) ∫ Q^{−tq′γ}(y+x) Q^{tq′w − q′u + ν − τ}(x) dx, compared with Q^{−q′v}(y)
    let c1: Vec<f64> = (0..r).map(|j| t[j] * qc * ga[j]).collect();
    let d1: Vec<f64> = (0..r).map(|j| t[j] * qc * w[j] - qc * u[j] + nu[j]).collect();
    let pre1: Vec<f64> = (0..r).map(|j| t[j] * qc * al[j] + qc * v[j]).collect();
    // I₂(x) = Q^{(1−t)s w}(x) ∫ Q^{−(1−t)sγ}(y+x) Q^{(1−t)sα − sv + μ − τ}(y) dy, compared with Q^{−su}(x)
    let c2: Vec<f64> = (0..r).map(|j| (1.0 - t[j]) * s * ga[j]).collect();
    let d2: Vec<f64> = (0..r).map(|j| (1.0 - t[j]) * s * al[j] - s * v[j] + mu[j]).collect();
    let pre2: Vec<f64> = (0..r).map(|j| (1.0 - t[j]) * s * w[j] + s * u[j]).collect();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (i, z) in probes.iter().enumerate() {
        let qz = cone.q_values(&z.embedded)?;
        let e1 = cone_beta_integral(cone, z, &c1, &d1, samples, seed.wrapping_add(2 * i as u64))?;
        first.push(e1.scaled(log_power_f(&pre1, &qz).exp()));
        let e2 = cone_beta_integral(cone, z, &c2, &d2, samples, seed.wrapping_add(2 * i as u64 + 1))?;
        second.push(e2.scaled(log_power_f(&pre2, &qz).exp()));
    }
    let max = |e: &[Estimate]| e.iter().map(|x| x.value).fold(0.0f64, f64::max);
    let m2 = max(&first).powf(1.0 / qc);
    let m1 = max(&second).powf(1.0 / s);
    let discrete = match lattice {
        Some(lat) => {
            let op = assemble_s(cone, ps, lat)?;
            let (dm1, dm2) = discrete_okikiolu_constants(&op, cone, ps, params);
            let est = norm_estimate(&op.normalized(q, s), q, s, &NormConfig { seed, ..NormConfig::default() });
            let holds = est.value <= dm1 * dm2 * (1.0 + 1e-9);
            if !holds {
                return Err(Error::BoundViolated(format!("discrete norm {} exceeds M1*M2 = {}", est.value, dm1 * dm2)));
            }
            Some(DiscreteCheck { m1: dm1, m2: dm2, norm_lower_bound: est.value, holds })
        }
        None => None,
    };
    let mut params = params.clone();
    params.m1 = Some(m1);
    params.m2 = Some(m2);
    Ok(OkikioluReport {
        params,
        spread_first: spread(&first),
        spread_second: spread(&second),
        first,
        second,
        m1,
        m2,
        discrete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_algebra::builtin_cone;
    use crate::indices::s_conditions;
    use crate::par::stream_rng;
    use crate::rational::parse_rat_list;

    #[test]
    fn bergman_equal_weights_feasible() {
        let e = builtin_cone("omegaE").unwrap();
        let nu = parse_rat_list("3,3,3").unwrap();
        let ps = ParamSet::bergman(&e, &nu, &nu, None, int(2), int(2)).unwrap();
        let p = okikiolu_params(&e, &ps);
        assert!(p.feasible, "{:?}", p.witness);
        assert!(p.t.iter().all(|t| *t > Rat::zero() && *t < Rat::one()));
    }

    #[test]
    fn agrees_with_conditions_on_random_sets() {
        let e = builtin_cone("omegaE").unwrap();
        let mut rng = stream_rng(11, 0);
        for _ in 0..200 {
            let ps = random_param_set(&e, &mut rng);
            let feasible = okikiolu_params(&e, &ps).feasible;
            let cond = s_conditions(&e, &ps).unwrap().satisfied.unwrap();
            assert_eq!(feasible, cond, "{}", serde_json::to_string(&ps).unwrap());
        }
    }
}
