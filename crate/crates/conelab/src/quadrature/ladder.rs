//! Nested truncation ladders and their divergence verdict.

use super::Estimate;
use serde::Serialize;

/// Thresholds for calling a ladder divergent.
#[derive(Clone, Debug, Serialize)]
pub struct LadderRule {
    /// Shell-to-shell ratio at or above which growth is not geometric decay.
    pub persist_ratio: f64,
    /// Minimal share of the last shell in the running total.
    pub min_share: f64,
    /// Level-to-level total growth factor (two consecutive levels).
    pub growth_factor: f64,
}

impl Default for LadderRule {
    fn default() -> Self {
        LadderRule { persist_ratio: 0.9, min_share: 0.02, growth_factor: 1.5 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderReport {
    pub levels: Vec<f64>,
    /// Contribution of each level beyond the previous one; entry 0 is the core.
    pub shells: Vec<Estimate>,
    pub totals: Vec<f64>,
    pub shell_ratios: Vec<f64>,
    pub divergent: bool,
    pub reason: String,
}

/// Divergent if the last two shells do not decay and the last one still
/// matters, or if totals grow by the growth factor twice in a row.
pub fn judge_ladder(levels: Vec<f64>, shells: Vec<Estimate>, rule: &LadderRule) -> LadderReport {
    let mut totals = Vec::with_capacity(shells.len());
    let mut acc = 0.0;
    for s in &shells {
        acc += s.value;
        totals.push(acc);
    }
    let shell_ratios: Vec<f64> =
        shells.windows(2).skip(1).map(|w| w[1].value / w[0].value.max(f64::MIN_POSITIVE)).collect();
    let k = shells.len();
    let mut divergent = false;
    let mut reason = String::from("shells decay");
    if k >= 4 {
        let last = &shells[k - 1];
        let persistent = shell_ratios[shell_ratios.len() - 2..].iter().all(|r| *r >= rule.persist_ratio);
        let share = last.value / totals[k - 1].max(f64::MIN_POSITIVE);
        let resolved = last.value > 2.0 * last.stderr;
        if persistent && share >= rule.min_share && resolved {
            divergent = true;
            reason = format!("last shells persist (ratios {:.3?}, share {:.3})", &shell_ratios[shell_ratios.len() - 2..], share);
        }
        let g1 = totals[k - 1] / totals[k - 2];
        let g2 = totals[k - 2] / totals[k - 3];
        if g1 > rule.growth_factor && g2 > rule.growth_factor {
            divergent = true;
            reason = format!("totals grow by {g2:.3} then {g1:.3}");
        }
    } else {
        reason = "too few levels".into();
    }
    LadderReport { levels, shells, totals, shell_ratios, divergent, reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(v: f64) -> Estimate {
        Estimate { value: v, stderr: v * 0.01, samples: 1 }
    }

    #[test]
    fn log_growth_is_divergent() {
        let shells = vec![est(1.0), est(0.7), est(0.7), est(0.7), est(0.7)];
        assert!(judge_ladder(vec![2., 3., 4., 5., 6.], shells, &LadderRule::default()).divergent);
    }

    #[test]
    fn geometric_decay_is_convergent() {
        let shells = vec![est(1.0), est(0.3), est(0.1), est(0.03), est(0.01)];
        assert!(!judge_ladder(vec![2., 3., 4., 5., 6.], shells, &LadderRule::default()).divergent);
    }

    #[test]
    fn power_growth_trips_growth_factor() {
        let shells = vec![est(1.0), est(1.0), est(2.0), est(4.0), est(8.0)];
        let rep = judge_ladder(vec![2., 3., 4., 5., 6.], shells, &LadderRule::default());
        assert!(rep.divergent);
    }
}
