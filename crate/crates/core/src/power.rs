//! Closed-form power for the standard and intended-effect analyses.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::normal;
use crate::scenario::{expected_decomposition, TrialScenario};
use crate::tables::{pooled_null_se, risk_difference, TwoByTwoTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub z_standard: f64,
    pub z_pos: f64,
    pub z_ratio: f64,
    pub power_standard: f64,
    pub power_pos: f64,
    pub alpha: f64,
}

/// Expected Z statistic, |RD| / se under the pooled null.
pub fn noncentrality(table: &TwoByTwoTable) -> Result<f64> {
    let rd = risk_difference(table)?;
    let (_, se) = pooled_null_se(table)?;
    Ok(rd.abs() / se)
}

/// Two-sided power at level `alpha`, ignoring the wrong-sign rejection tail.
pub fn power_from_z(z: f64, alpha: f64) -> f64 {
    normal::cdf(z - normal::quantile(1.0 - alpha / 2.0))
}

/// Ratio of the ever-positive noncentrality to the overall one,
///
/// ```text
///     {1 − RD_neg/RD · P(M−)} · sqrt(P(M+) / (P(M+|D+) · P(M+|D−)))
/// ```
///
/// with the conditional positivities taken from the expected decomposition.
pub fn z_ratio(s: &TrialScenario) -> Result<f64> {
    let d = expected_decomposition(s)?;
    let overall = d.overall();
    let rd = risk_difference(&overall)?;
    if rd.abs() < 1e-15 {
        return Err(Error::ZeroRiskDifference);
    }
    let p_neg = 1.0 - s.p_m;
    let brace = if p_neg > 0.0 {
        1.0 - risk_difference(&d.never)? / rd * p_neg
    } else {
        1.0
    };
    let m_given_event = d.ever.total_events() / overall.total_events();
    let ever_nonevents = d.ever.nonevents_screen + d.ever.nonevents_control;
    let all_nonevents = overall.nonevents_screen + overall.nonevents_control;
    let m_given_nonevent = ever_nonevents / all_nonevents;
    Ok(brace * (s.p_m / (m_given_event * m_given_nonevent)).sqrt())
}

/// Noncentralities, their ratio, and both powers for a scenario.
pub fn analyze_power(s: &TrialScenario, alpha: f64) -> Result<PowerResult> {
    check_open_unit("alpha", alpha)?;
    if s.rr == 1.0 {
        return Err(Error::ZeroRiskDifference);
    }
    let d = expected_decomposition(s)?;
    let z_standard = noncentrality(&d.overall())?;
    let z_pos = noncentrality(&d.ever)?;
    Ok(PowerResult {
        z_standard,
        z_pos,
        z_ratio: z_ratio(s)?,
        power_standard: power_from_z(z_standard, alpha),
        power_pos: power_from_z(z_pos, alpha),
        alpha,
    })
}

/// One grid point of a power curve. Infeasible points carry `feasible =
/// false` and no power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub rr_pos: f64,
    pub p_m: f64,
    pub rr_neg: f64,
    pub feasible: bool,
    pub power_pos: Option<f64>,
    pub power_standard: Option<f64>,
}

/// Ever-positive power over the grid, ordered by `rr_neg`, then `p_m`, then
/// `rr_pos`.
pub fn power_curve(
    base: &TrialScenario,
    rr_pos_grid: &[f64],
    p_m_grid: &[f64],
    rr_neg_set: &[f64],
    alpha: f64,
) -> Vec<PowerPoint> {
    let mut out = Vec::with_capacity(rr_pos_grid.len() * p_m_grid.len() * rr_neg_set.len());
    for &rr_neg in rr_neg_set {
        for &p_m in p_m_grid {
            for &rr_pos in rr_pos_grid {
                let s = base.with_rr_neg(rr_neg).with_p_m(p_m).with_rr_pos(rr_pos);
                let powers = expected_decomposition(&s).and_then(|d| {
                    Ok((
                        power_from_z(noncentrality(&d.ever)?, alpha),
                        power_from_z(noncentrality(&d.overall())?, alpha),
                    ))
                });
                let (feasible, power_pos, power_standard) = match powers {
                    Ok((p, q)) => (true, Some(p), Some(q)),
                    Err(_) => (false, None, None),
                };
                out.push(PowerPoint {
                    rr_pos,
                    p_m,
                    rr_neg,
                    feasible,
                    power_pos,
                    power_standard,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Standard,
    EverPositive,
}

/// Smallest total_n (other parameters fixed) whose analytic power reaches
/// `target`, by bisection. Errors if even `max_total_n` falls short.
pub fn required_total_n(
    base: &TrialScenario,
    analysis: Analysis,
    target: f64,
    alpha: f64,
    max_total_n: u64,
) -> Result<u64> {
    check_open_unit("target", target)?;
    let power_at = |n: u64| -> Result<f64> {
        let r = analyze_power(&base.with_total_n(n), alpha)?;
        Ok(match analysis {
            Analysis::Standard => r.power_standard,
            Analysis::EverPositive => r.power_pos,
        })
    };
    let mut hi = max_total_n;
    if power_at(hi)? < target {
        return Err(Error::InvalidParameter {
            name: "target",
            value: target,
            reason: "not reached within the sample-size search range",
        });
    }
    let mut lo = 2u64;
    if power_at(lo).map(|p| p >= target).unwrap_or(false) {
        return Ok(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match power_at(mid) {
            Ok(p) if p >= target => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_overall_effect_is_rejected() {
        let s = TrialScenario::figure1().with_rr(1.0);
        assert_eq!(analyze_power(&s, 0.05), Err(Error::ZeroRiskDifference));
    }

    #[test]
    fn noncentrality_examples() {
        let d = expected_decomposition(&TrialScenario::figure1()).unwrap();
        assert!((noncentrality(&d.overall()).unwrap() - 2.316_3).abs() < 5e-5);
        assert!((noncentrality(&d.ever).unwrap() - 3.149_6).abs() < 2e-4);
        let same = TwoByTwoTable::new(10.0, 90.0, 10.0, 90.0);
        assert_eq!(noncentrality(&same).unwrap(), 0.0);
    }

    #[test]
    fn power_from_z_examples() {
        assert!((power_from_z(3.149_6, 0.05) - 0.883).abs() < 1e-3);
        assert!((power_from_z(2.316_3, 0.05) - 0.639).abs() < 1e-3);
        assert!((power_from_z(normal::quantile(0.975), 0.05) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn z_ratio_examples() {
        let s = TrialScenario::figure1();
        let r = z_ratio(&s).unwrap();
        assert!((r - 1.359_8).abs() < 5e-5, "{r}");

        let all = s.with_p_m(1.0).with_rr_pos(0.9);
        assert!((z_ratio(&all).unwrap() - 1.0).abs() < 1e-12);

        let harm = s.with_rr_neg(1.05);
        assert!(z_ratio(&harm).unwrap() > r);

        let null = s.with_rr(1.0).with_rr_pos(1.0);
        assert_eq!(z_ratio(&null).unwrap_err(), Error::ZeroRiskDifference);
    }

    #[test]
    fn analyze_power_figure1() {
        let r = analyze_power(&TrialScenario::figure1(), 0.05).unwrap();
        assert!((r.power_pos - 0.883).abs() < 1e-3);
        assert!((r.power_standard - 0.639).abs() < 1e-3);
        assert!((r.z_ratio * r.z_standard - r.z_pos).abs() < 1e-9);
    }

    #[test]
    fn power_curve_flags_infeasible_points() {
        let base = TrialScenario::figure1().with_total_n(50_000);
        let pts = power_curve(&base, &[0.5, 0.9], &[0.001, 0.05], &[1.0], 0.05);
        assert_eq!(pts.len(), 4);
        // rr_pos = 0.5 with 0.1% ever-positive needs x > 1.
        assert!(!pts[0].feasible && pts[0].power_pos.is_none());
        assert!(pts[2].feasible && pts[3].feasible);
        assert!(pts[2].power_pos.unwrap() > pts[3].power_pos.unwrap());
    }

    #[test]
    fn power_curve_identical_tables() {
        let base = TrialScenario::figure1();
        let pts = power_curve(&base, &[0.9], &[1.0], &[1.0], 0.05);
        assert_eq!(pts[0].power_pos, pts[0].power_standard);
    }

    #[test]
    fn figure2_base_power() {
        let base = TrialScenario::figure1().with_total_n(50_000);
        let r = analyze_power(&base, 0.05).unwrap();
        assert!((r.power_standard - 0.374).abs() < 1e-3, "{}", r.power_standard);
        // Monotone in rr_pos for p_m ≥ 5%.
        let grid: Vec<f64> = (0..=40).map(|i| 0.5 + 0.01 * i as f64).collect();
        for p_m in [0.05, 0.5, 0.9] {
            let pts = power_curve(&base, &grid, &[p_m], &[1.0], 0.05);
            for w in pts.windows(2) {
                if let (Some(a), Some(b)) = (w[0].power_pos, w[1].power_pos) {
                    assert!(a >= b - 1e-12, "p_m={p_m} rr_pos={}", w[1].rr_pos);
                }
            }
        }
    }

    #[test]
    fn low_positivity_pair() {
        let s = TrialScenario {
            total_n: 25_000,
            control_fraction: 0.5,
            p0: 0.02,
            rr: 0.8,
            p_m: 0.025,
            rr_neg: 1.0,
            rr_pos: 0.8,
        };
        let hi = analyze_power(&s, 0.05).unwrap().power_pos;
        let lo = analyze_power(&s.with_rr_pos(0.7), 0.05).unwrap().power_pos;
        assert!(hi > lo, "{hi} vs {lo}");
    }

    #[test]
    fn sample_size_for_ninety_percent() {
        let s = TrialScenario::figure1();
        let ie = required_total_n(&s, Analysis::EverPositive, 0.9, 0.05, 1_000_000).unwrap();
        let std = required_total_n(&s, Analysis::Standard, 0.9, 0.05, 1_000_000).unwrap();
        assert!((ie as f64 / 2.0 - 53_000.0).abs() < 2_000.0, "{ie}");
        assert!((std as f64 / 2.0 - 98_000.0).abs() < 2_000.0, "{std}");
        let r = analyze_power(&s.with_total_n(ie), 0.05).unwrap();
        assert!(r.power_pos >= 0.9);
        let r = analyze_power(&s.with_total_n(ie - 1), 0.05).unwrap();
        assert!(r.power_pos < 0.9);
    }
}
