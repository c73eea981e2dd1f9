//! The necessity counterexample at the critical exponent
//! q = 2(1 + ν_r/(n_r/2)): a function g with finite weighted norm whose
//! pairing integral I(e, 0) diverges logarithmically.
//!
//! g(ξ) = e^{−(ξ|e)} Q*(ξ)^α (1 + |ln Q*_r(ξ)|)^{−1/2} with α_r = −1/2.

use crate::cone_algebra::ConeSpec;
use crate::error::{Error, Result};
use crate::indices::ser_rats;
use crate::quadrature::{depth_integral, growth_fit, DepthEvidence, DepthSetup, GrowthFit};
use crate::rational::{format_rat, int, rat, to_f64, Rat};
use num_traits::Zero;
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleConfig {
    pub max_level: u32,
    pub samples_per_level: usize,
    pub seed: u64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig { max_level: 6, samples_per_level: 20_000, seed: 1 }
    }
}

/// Tail bound for the norm partial sums.
pub const CAUCHY_TAIL: f64 = 0.01;
/// Minimum R² of the logarithmic fit.
pub const LOG_FIT_R2: f64 = 0.99;
/// Band for successive increment ratios of a log-divergent ladder.
pub const INCREMENT_BAND: (f64, f64) = (0.8, 1.2);
/// Number of trailing increment ratios held to the band; the first shells
/// still carry the core's transient.
pub const BAND_TAIL: usize = 3;

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub cone: String,
    #[serde(serialize_with = "ser_rats")]
    pub nu: Vec<Rat>,
    pub q: String,
    #[serde(serialize_with = "ser_rats")]
    pub alpha: Vec<Rat>,
    /// Depth truncations of the majorant of ‖g‖^q.
    pub norm: DepthEvidence,
    pub norm_tail: f64,
    pub norm_cauchy: bool,
    /// Depth truncations of I(e, 0).
    pub pairing: DepthEvidence,
    pub log_fit: GrowthFit,
    pub increment_ratios: Vec<f64>,
    pub log_divergent: bool,
    pub reproduced: bool,
}

/// 2(1 + ν_r/(n_r/2))
pub fn critical_exponent(cone: &ConeSpec, nu: &[Rat]) -> Result<Rat> {
    let r = cone.rank();
    if nu.len() != r {
        return Err(Error::LengthMismatch { expected: r, got: nu.len() });
    }
    let n_r = &cone.n_exact()[r - 1];
    if n_r.is_zero() {
        return Err(Error::Precondition(format!("cone {} has n_r = 0; no critical exponent", cone.name)));
    }
    Ok(int(2) * (int(1) + &nu[r - 1] * int(2) / n_r))
}

/// α_j one above the threshold ((ν_j + n_j/2)·2/q − τ_j)/2 for j < r, α_r = −1/2.
pub fn counterexample_alpha(cone: &ConeSpec, nu: &[Rat], q: &Rat) -> Vec<Rat> {
    let r = cone.rank();
    let (n, tau) = (cone.n_exact(), cone.tau_exact());
    let half = rat(1, 2);
    (0..r)
        .map(|j| if j + 1 == r { -half.clone() } else { ((&nu[j] + &n[j] * &half) * int(2) / q - &tau[j]) * &half + int(1) })
        .collect()
}

pub fn counterexample_necessary(cone: &Arc<ConeSpec>, nu: &[Rat], q: &Rat, cfg: &CounterexampleConfig) -> Result<CounterexampleReport> {
    let critical = critical_exponent(cone, nu)?;
    if *q != critical {
        return Err(Error::Precondition(format!(
            "q = {} is not the critical exponent {}",
            format_rat(q),
            format_rat(&critical)
        )));
    }
    let r = cone.rank();
    let alpha = counterexample_alpha(cone, nu, q);
    let (af, nf, tau, qf) = (alpha.iter().map(to_f64).collect::<Vec<_>>(), nu.iter().map(to_f64).collect::<Vec<_>>(), cone.tau(), to_f64(q));
    // majorant of |g|^q against Q*^{ν−τ}
    let norm_alpha: Vec<f64> = (0..r).map(|j| (2.0 * af[j] + tau[j]) * qf / 2.0 - nf[j] - tau[j]).collect();
    let norm = depth_integral(
        cone,
        &DepthSetup {
            alpha: norm_alpha,
            beta: -qf / 2.0,
            pairing_scale: qf,
            max_level: cfg.max_level,
            samples_per_level: cfg.samples_per_level,
            seed: cfg.seed,
        },
    );
    let pairing = depth_integral(
        cone,
        &DepthSetup {
            alpha: af.iter().map(|a| 2.0 * a).collect(),
            beta: -1.0,
            pairing_scale: 2.0,
            max_level: cfg.max_level,
            samples_per_level: cfg.samples_per_level,
            seed: cfg.seed.wrapping_add(1000),
        },
    );
    let norm_tail = norm.last_relative_increment();
    let log_fit = growth_fit(&pairing.depths[1..], &pairing.totals[1..], 0.0);
    let increment_ratios = pairing.increment_ratios();
    let log_divergent = log_fit.r_squared > LOG_FIT_R2
        && log_fit.slope > 0.0
        && increment_ratios
            .iter()
            .rev()
            .take(BAND_TAIL)
            .all(|x| *x >= INCREMENT_BAND.0 && *x <= INCREMENT_BAND.1);
    let norm_cauchy = norm_tail < CAUCHY_TAIL;
    Ok(CounterexampleReport {
        cone: cone.name.clone(),
        nu: nu.to_vec(),
        q: format_rat(q),
        alpha,
        norm,
        norm_tail,
        norm_cauchy,
        pairing,
        log_fit,
        increment_ratios,
        log_divergent,
        reproduced: norm_cauchy && log_divergent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_algebra::builtin_cone;
    use crate::rational::parse_rat_list;

    #[test]
    fn omega_e_critical_exponent_and_alpha() {
        let e = builtin_cone("omegaE").unwrap();
        let nu = parse_rat_list("3,3,3").unwrap();
        let q = critical_exponent(&e, &nu).unwrap();
        assert_eq!(q, int(6));
        assert_eq!(counterexample_alpha(&e, &nu, &q), vec![rat(1, 4), rat(7, 12), rat(-1, 2)]);
    }

    #[test]
    fn halfline_rejected() {
        let h = builtin_cone("halfline").unwrap();
        assert!(matches!(critical_exponent(&h, &[int(1)]), Err(Error::Precondition(_))));
    }
}
