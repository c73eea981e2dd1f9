//! Boundedness conditions and index ranges in exact rational arithmetic.

use crate::cone_algebra::ConeSpec;
use crate::error::{Error, Result};
use crate::rational::{conjugate, format_rat, int, rat, ExtRat, OpenInterval, Rat};
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;

fn half() -> Rat {
    rat(1, 2)
}

fn check_len(cone: &ConeSpec, v: &[Rat]) -> Result<()> {
    if v.len() != cone.rank() {
        return Err(Error::LengthMismatch { expected: cone.rank(), got: v.len() });
    }
    Ok(())
}

/// ν_j > floor_j for all j, else WeightOutOfRange naming the first failure.
fn require_above(nu: &[Rat], floor: &[Rat], what: &str) -> Result<()> {
    for (j, (v, f)) in nu.iter().zip(floor).enumerate() {
        if v <= f {
            return Err(Error::WeightOutOfRange(format!(
                "nu_{} = {} must exceed {} = {}",
                j + 1,
                format_rat(v),
                what,
                format_rat(f)
            )));
        }
    }
    Ok(())
}

/// 1 + min_j num_j/(n_j/2), with n_j = 0 terms dropped (+∞).
fn one_plus_min_ratio(n: &[Rat], num: &[Rat]) -> ExtRat {
    let mut best = ExtRat::PosInf;
    for (nj, v) in n.iter().zip(num) {
        if !nj.is_zero() {
            best = best.min(ExtRat::Finite(v / (nj * half())));
        }
    }
    best.add_rat(&Rat::one())
}

fn b_or_zero(cone: &ConeSpec, b: Option<&[Rat]>) -> Result<Vec<Rat>> {
    match b {
        Some(b) => {
            check_len(cone, b)?;
            Ok(b.to_vec())
        }
        None => Ok(vec![Rat::zero(); cone.rank()]),
    }
}

/// a_ν = 1 + min_j (ν_j − m_j/2)/(n_j/2).
pub fn a_nu(cone: &ConeSpec, nu: &[Rat]) -> Result<ExtRat> {
    check_len(cone, nu)?;
    let m = cone.m_exact();
    let floor: Vec<Rat> = m.iter().map(|x| x * half()).collect();
    require_above(nu, &floor, "m_j/2")?;
    let num: Vec<Rat> = nu.iter().zip(&floor).map(|(v, f)| v - f).collect();
    Ok(one_plus_min_ratio(&cone.n_exact(), &num))
}

/// c_ν = 1 + min_j ν_j/(n_j/2).
pub fn c_nu(cone: &ConeSpec, nu: &[Rat]) -> Result<ExtRat> {
    check_len(cone, nu)?;
    require_above(nu, &vec![Rat::zero(); nu.len()], "0")?;
    Ok(one_plus_min_ratio(&cone.n_exact(), nu))
}

/// One j-wise condition or range contribution.
#[derive(Clone, Debug, Serialize)]
pub struct Constraint {
    pub j: usize,
    pub label: String,
    pub value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holds: Option<bool>,
}

impl Constraint {
    fn bound(j: usize, label: &str, value: &ExtRat) -> Constraint {
        Constraint { j: j + 1, label: label.into(), value: value.to_string(), holds: None }
    }

    fn check(j: usize, label: &str, lhs: &Rat, rhs: &Rat, holds: bool) -> Constraint {
        Constraint {
            j: j + 1,
            label: label.into(),
            value: format!("{} vs {}", format_rat(lhs), format_rat(rhs)),
            holds: Some(holds),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexReport {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<OpenInterval>,
    pub per_j: Vec<Constraint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied: Option<bool>,
    /// Named exact quantities computed on the way.
    pub values: BTreeMap<String, String>,
}

impl IndexReport {
    fn new(name: &str) -> IndexReport {
        IndexReport { name: name.into(), range: None, per_j: Vec::new(), satisfied: None, values: BTreeMap::new() }
    }

    /// First failing j-wise condition.
    pub fn first_failure(&self) -> Option<&Constraint> {
        self.per_j.iter().find(|c| c.holds == Some(false))
    }

    /// Sets `satisfied` for a concrete exponent when a range is present.
    pub fn with_exponent(mut self, q: Option<&Rat>) -> IndexReport {
        if let (Some(q), Some(range)) = (q, &self.range) {
            self.satisfied = Some(range.contains(q));
            self.values.insert("q".into(), format_rat(q));
        }
        self
    }
}

/// 1 + max_j (n_j/2)/ν_j < q < 1 + min_j ν_j/(n_j/2), tube domain.
pub fn sharp_range_tube(cone: &ConeSpec, nu: &[Rat]) -> Result<IndexReport> {
    check_len(cone, nu)?;
    let m = cone.m_exact();
    let n = cone.n_exact();
    require_above(nu, &m.iter().map(|x| x * half()).collect::<Vec<_>>(), "m_j/2")?;
    let mut rep = IndexReport::new("sharp_range_tube");
    let mut lo = Rat::zero();
    let mut hi = ExtRat::PosInf;
    for j in 0..cone.rank() {
        let l = &n[j] * half() / &nu[j];
        let u = if n[j].is_zero() { ExtRat::PosInf } else { ExtRat::Finite(&nu[j] / (&n[j] * half())) };
        rep.per_j.push(Constraint::bound(j, "lower: 1 + (n_j/2)/nu_j", &ExtRat::Finite(&l + Rat::one())));
        rep.per_j.push(Constraint::bound(j, "upper: 1 + nu_j/(n_j/2)", &u.add_rat(&Rat::one())));
        if l > lo {
            lo = l;
        }
        hi = hi.min(u);
    }
    rep.range = Some(OpenInterval::new(lo + Rat::one(), hi.add_rat(&Rat::one())));
    Ok(rep)
}

/// 2(1 + min_j (ν_j + b_j/2)/(n_j/2)) and its conjugate.
pub fn mixed_range(cone: &ConeSpec, nu: &[Rat], b: Option<&[Rat]>) -> Result<IndexReport> {
    check_len(cone, nu)?;
    let b = b_or_zero(cone, b)?;
    let m = cone.m_exact();
    let floor: Vec<Rat> = m.iter().zip(&b).map(|(m, b)| (m + b) * half()).collect();
    require_above(nu, &floor, "(m_j + b_j)/2")?;
    let num: Vec<Rat> = nu.iter().zip(&b).map(|(v, b)| v + b * half()).collect();
    let base = one_plus_min_ratio(&cone.n_exact(), &num);
    let hi = base.mul_rat(&int(2));
    let lo = ext_conjugate(&hi);
    let mut rep = IndexReport::new("mixed_range");
    rep.values.insert("upper".into(), hi.to_string());
    rep.range = Some(OpenInterval::new(lo, hi));
    Ok(rep)
}

/// Conjugate of an endpoint > 1; ∞′ = 1.
pub fn ext_conjugate(q: &ExtRat) -> Rat {
    match q {
        ExtRat::PosInf => Rat::one(),
        ExtRat::Finite(v) => conjugate(v).finite().cloned().expect("endpoint exceeds 1"),
    }
}

/// (U′, U) with U = q̄_ν − q̄_ν/q_ν + 2.
pub fn result3_range(cone: &ConeSpec, nu: &[Rat], b: Option<&[Rat]>) -> Result<IndexReport> {
    check_len(cone, nu)?;
    let b = b_or_zero(cone, b)?;
    let m = cone.m_exact();
    let n = cone.n_exact();
    let floor: Vec<Rat> = m.iter().zip(&b).map(|(m, b)| (m + b) * half()).collect();
    require_above(nu, &floor, "(m_j + b_j)/2")?;
    let low_num: Vec<Rat> = nu.iter().zip(&floor).map(|(v, f)| v - f).collect();
    let high_num: Vec<Rat> = nu.iter().zip(&b).map(|(v, b)| v + b * half()).collect();
    let q_nu = one_plus_min_ratio(&n, &low_num);
    let q_bar = one_plus_min_ratio(&n, &high_num);
    let hi = match (&q_nu, &q_bar) {
        (ExtRat::Finite(a), ExtRat::Finite(c)) => ExtRat::Finite(c - c / a + int(2)),
        _ => ExtRat::PosInf,
    };
    let mut rep = IndexReport::new("result3_range");
    rep.values.insert("q_nu".into(), q_nu.to_string());
    rep.values.insert("q_bar_nu".into(), q_bar.to_string());
    rep.range = Some(OpenInterval::new(ext_conjugate(&hi), hi));
    Ok(rep)
}

/// Exponents of the operator family and its weighted spaces.
#[derive(Clone, Debug, Serialize)]
pub struct ParamSet {
    #[serde(skip)]
    pub rank: usize,
    #[serde(serialize_with = "ser_rats")]
    pub alpha: Vec<Rat>,
    #[serde(serialize_with = "ser_rats")]
    pub beta: Vec<Rat>,
    #[serde(serialize_with = "ser_rats")]
    pub gamma: Vec<Rat>,
    #[serde(serialize_with = "ser_rats")]
    pub nu: Vec<Rat>,
    #[serde(serialize_with = "ser_rats")]
    pub mu: Vec<Rat>,
    #[serde(serialize_with = "ser_rats")]
    pub b: Vec<Rat>,
    #[serde(serialize_with = "ser_rat")]
    pub p: Rat,
    #[serde(serialize_with = "ser_rat")]
    pub q: Rat,
    #[serde(serialize_with = "ser_rat")]
    pub s: Rat,
}

pub(crate) fn ser_rats<S: serde::Serializer>(v: &[Rat], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(format_rat))
}

pub(crate) fn ser_rat<S: serde::Serializer>(v: &Rat, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rat(v))
}

impl ParamSet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cone: &ConeSpec,
        alpha: Vec<Rat>,
        beta: Vec<Rat>,
        gamma: Vec<Rat>,
        nu: Vec<Rat>,
        mu: Vec<Rat>,
        b: Vec<Rat>,
        (p, q, s): (Rat, Rat, Rat),
    ) -> Result<ParamSet> {
        for v in [&alpha, &beta, &gamma, &nu, &mu, &b] {
            check_len(cone, v)?;
        }
        for (name, e) in [("p", &p), ("q", &q), ("s", &s)] {
            if *e <= Rat::one() {
                return Err(Error::WeightOutOfRange(format!("{name} = {} must exceed 1", format_rat(e))));
            }
        }
        Ok(ParamSet { rank: cone.rank(), alpha, beta, gamma, nu, mu, b, p, q, s })
    }

    /// P_ν = T_{0, ν−b/2−τ, ν} from L^q_ν to L^s_μ.
    pub fn bergman(cone: &ConeSpec, nu: &[Rat], mu: &[Rat], b: Option<&[Rat]>, q: Rat, s: Rat) -> Result<ParamSet> {
        check_len(cone, nu)?;
        let b = b_or_zero(cone, b)?;
        let tau = cone.tau_exact();
        let beta = (0..cone.rank()).map(|j| &nu[j] - &b[j] * half() - &tau[j]).collect();
        ParamSet::new(cone, vec![Rat::zero(); cone.rank()], beta, nu.to_vec(), nu.to_vec(), mu.to_vec(), b, (int(2), q, s))
    }

    /// γ forced by the balance condition given the other exponents.
    pub fn balanced_gamma(&self, cone: &ConeSpec) -> Vec<Rat> {
        let tau = cone.tau_exact();
        (0..self.rank)
            .map(|j| {
                let bh = &self.b[j] * half();
                &self.alpha[j] + &self.beta[j] + &tau[j] + &bh - (&self.nu[j] + &bh) / &self.q
                    + (&self.mu[j] + &bh) / &self.s
            })
            .collect()
    }
}

fn sum(v: &[Rat]) -> Rat {
    v.iter().fold(Rat::zero(), |a, b| a + b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Necessary,
    Sufficient,
}

/// The j-wise boundedness system for P_ν⁺ from L^q_ν to L^s_μ.
pub fn main_result_check(cone: &ConeSpec, ps: &ParamSet, direction: Direction) -> Result<IndexReport> {
    let m = cone.m_exact();
    let n = cone.n_exact();
    let floor: Vec<Rat> = m.iter().zip(&ps.b).map(|(m, b)| (m + b) * half()).collect();
    require_above(&ps.nu, &floor, "(m_j + b_j)/2")?;
    let (q, s) = (&ps.q, &ps.s);
    let mut rep = IndexReport::new(match direction {
        Direction::Necessary => "main_result_necessary",
        Direction::Sufficient => "main_result_sufficient",
    });
    let three_half = rat(3, 2);
    if direction == Direction::Necessary {
        let bsum = sum(&ps.b);
        let lhs = (sum(&ps.nu) + &three_half * &bsum) / q;
        let rhs = (sum(&ps.mu) + &three_half * &bsum) / s + &bsum;
        rep.per_j.push(Constraint::check(0, "(|nu|+3|b|/2)/q = (|mu|+3|b|/2)/s + |b|", &lhs, &rhs, lhs == rhs));
    }
    for j in 0..cone.rank() {
        let bh = &ps.b[j] * half();
        let nh = &n[j] * half();
        let nub = &ps.nu[j] + &bh;
        let mub = &ps.mu[j] + &bh;
        if direction == Direction::Sufficient {
            let (l, r) = (&nub / q, &mub / s);
            rep.per_j.push(Constraint::check(j, "(nu_j+b_j/2)/q = (mu_j+b_j/2)/s", &l, &r, l == r));
        }
        rep.per_j.push(Constraint::check(j, "1 < q", &int(1), q, *q > int(1)));
        let upper = if n[j].is_zero() { None } else { Some(int(1) + &nub / &nh) };
        match &upper {
            Some(u) => rep.per_j.push(Constraint::check(j, "q < 1 + (nu_j+b_j/2)/(n_j/2)", q, u, q < u)),
            None => rep.per_j.push(Constraint { j: j + 1, label: "q < 1 + (nu_j+b_j/2)/(n_j/2)".into(), value: "inf".into(), holds: Some(true) }),
        }
        let lo = &m[j] * half() + &bh;
        rep.per_j.push(Constraint::check(j, "m_j/2 + b_j/2 < mu_j", &lo, &ps.mu[j], lo < ps.mu[j]));
        let hi = s * &nub - &nh - &bh;
        rep.per_j.push(Constraint::check(j, "mu_j < s(nu_j+b_j/2) - n_j/2 - b_j/2", &ps.mu[j], &hi, ps.mu[j] < hi));
    }
    rep.satisfied = Some(rep.per_j.iter().all(|c| c.holds != Some(false)));
    Ok(rep)
}

/// Balance, source-side and target-side conditions and the homogeneity identity for the positive
/// operator S_{α,β,γ} from L^q_ν to L^s_μ.
pub fn s_conditions(cone: &ConeSpec, ps: &ParamSet) -> Result<IndexReport> {
    let m = cone.m_exact();
    let n = cone.n_exact();
    let tau = cone.tau_exact();
    let (q, s) = (&ps.q, &ps.s);
    let mut rep = IndexReport::new("S_conditions");
    let q_conj = conjugate(q).finite().cloned().expect("q > 1");
    let mut hypotheses = *q <= *s;
    rep.per_j.push(Constraint::check(0, "q <= s", q, s, *q <= *s));
    for j in 0..cone.rank() {
        let bh = &ps.b[j] * half();
        let v = (&ps.nu[j] + &bh) / &q_conj + (&ps.mu[j] + &bh) / s;
        let ok = v.is_positive();
        hypotheses &= ok;
        rep.per_j.push(Constraint::check(j, "(nu_j+b_j/2)/q' + (mu_j+b_j/2)/s > 0", &v, &Rat::zero(), ok));
    }
    let gamma = ps.balanced_gamma(cone);
    let mut conditions = true;
    for j in 0..cone.rank() {
        let bh = &ps.b[j] * half();
        let (mh, nh) = (&m[j] * half(), &n[j] * half());
        let ok0 = ps.gamma[j] == gamma[j];
        rep.per_j.push(Constraint::check(j, "balance: gamma_j", &ps.gamma[j], &gamma[j], ok0));
        let l1 = q * (&ps.beta[j] - &ps.gamma[j] + &tau[j] + &nh + &bh) - &nh - &bh;
        let ok1 = l1 < ps.nu[j];
        rep.per_j.push(Constraint::check(j, "source: q(beta_j-gamma_j+tau_j+n_j/2+b_j/2)-n_j/2-b_j/2 < nu_j", &l1, &ps.nu[j], ok1));
        let l2 = q * (&ps.beta[j] + &tau[j] - &mh) + &mh + &bh;
        let ok2 = l2 > ps.nu[j];
        rep.per_j.push(Constraint::check(j, "source: q(beta_j+tau_j-m_j/2)+m_j/2+b_j/2 > nu_j", &l2, &ps.nu[j], ok2));
        let l3 = &mh - s * &ps.alpha[j] + &bh;
        let ok3 = l3 < ps.mu[j];
        rep.per_j.push(Constraint::check(j, "target: m_j/2-s alpha_j+b_j/2 < mu_j", &l3, &ps.mu[j], ok3));
        let l4 = s * (&ps.gamma[j] - &ps.alpha[j] + &bh) - &nh - &bh;
        let ok4 = ps.mu[j] < l4;
        rep.per_j.push(Constraint::check(j, "target: mu_j < s(gamma_j-alpha_j+b_j/2)-n_j/2-b_j/2", &ps.mu[j], &l4, ok4));
        conditions &= ok0 && ok1 && ok2 && ok3 && ok4;
    }
    let residual = homogeneity_residual(cone, ps);
    rep.values.insert("homogeneity_residual".into(), format_rat(&residual));
    rep.values.insert("hypotheses".into(), hypotheses.to_string());
    rep.satisfied = Some(hypotheses && conditions);
    Ok(rep)
}

/// |γ| − (|α|+|β|+|τ|+3|b|/2 − (|ν|+3|b|/2)/q + (|μ|+3|b|/2)/s).
pub fn homogeneity_residual(cone: &ConeSpec, ps: &ParamSet) -> Rat {
    let tb = rat(3, 2) * sum(&ps.b);
    sum(&ps.gamma)
        - (sum(&ps.alpha) + sum(&ps.beta) + sum(&cone.tau_exact()) + &tb - (sum(&ps.nu) + &tb) / &ps.q
            + (sum(&ps.mu) + &tb) / &ps.s)
}

/// Everything the `indices` subcommand reports for one ν.
#[derive(Clone, Debug, Serialize)]
pub struct IndexSummary {
    pub cone: String,
    #[serde(serialize_with = "ser_rats")]
    pub nu: Vec<Rat>,
    pub a_nu: Option<ExtRat>,
    pub c_nu: Option<ExtRat>,
    pub sharp_range: Option<IndexReport>,
    pub mixed_range: Option<IndexReport>,
    pub result3_range: Option<IndexReport>,
    pub main_result: Vec<IndexReport>,
    pub s_conditions: Option<IndexReport>,
    pub notes: Vec<String>,
}

pub fn summarize(
    cone: &ConeSpec,
    nu: &[Rat],
    mu: Option<&[Rat]>,
    b: Option<&[Rat]>,
    q: Option<&Rat>,
    s: Option<&Rat>,
) -> Result<IndexSummary> {
    check_len(cone, nu)?;
    let mut notes = Vec::new();
    let keep = |r: Result<IndexReport>, notes: &mut Vec<String>| match r {
        Ok(v) => Some(v.with_exponent(q)),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let a = a_nu(cone, nu).map_err(|e| notes.push(e.to_string())).ok();
    let c = c_nu(cone, nu).map_err(|e| notes.push(e.to_string())).ok();
    let sharp = keep(sharp_range_tube(cone, nu), &mut notes);
    let mixed = keep(mixed_range(cone, nu, b), &mut notes);
    let r3 = keep(result3_range(cone, nu, b), &mut notes);
    let mut main = Vec::new();
    let mut sc = None;
    if let Some(q) = q {
        let s = s.cloned().unwrap_or_else(|| q.clone());
        let mu = mu.map(|m| m.to_vec()).unwrap_or_else(|| nu.to_vec());
        match ParamSet::bergman(cone, nu, &mu, b, q.clone(), s) {
            Ok(ps) => {
                for d in [Direction::Necessary, Direction::Sufficient] {
                    if let Some(r) = keep(main_result_check(cone, &ps, d), &mut notes) {
                        main.push(r);
                    }
                }
                sc = keep(s_conditions(cone, &ps), &mut notes);
            }
            Err(e) => notes.push(e.to_string()),
        }
    }
    Ok(IndexSummary {
        cone: cone.name.clone(),
        nu: nu.to_vec(),
        a_nu: a,
        c_nu: c,
        sharp_range: sharp,
        mixed_range: mixed,
        result3_range: r3,
        main_result: main,
        s_conditions: sc,
        notes,
    })
}
