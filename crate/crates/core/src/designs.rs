//! Parameter sets of the published worked example, power curves, and
//! simulation tables.

use crate::mechanisms::{DegradationModel, Mechanisms, NonComplianceModel, SamplingPlan};
use crate::scenario::TrialScenario;
use crate::simulator::SimConfig;

/// Worked example: 50,000 per arm.
pub fn worked_example() -> TrialScenario {
    TrialScenario::figure1()
}

/// Base for the power curves over RR_pos and ever-positivity. The total
/// size is not published; 50,000 gives the quoted standard-analysis power
/// to within a point.
pub fn power_curve_base() -> TrialScenario {
    TrialScenario::figure1().with_total_n(50_000)
}

pub const POWER_CURVE_RR_POS: [f64; 9] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9];
pub const POWER_CURVE_P_M: [f64; 4] = [0.025, 0.05, 0.5, 0.9];
pub const POWER_CURVE_RR_NEG: [f64; 3] = [1.0, 1.05, 0.95];

/// Low-positivity pair: RR 0.8, 2.5% ever-positive, 12,500 per arm, at
/// RR_pos 0.8 and 0.7.
pub fn low_positivity_pair() -> [TrialScenario; 2] {
    let base = TrialScenario {
        total_n: 25_000,
        control_fraction: 0.5,
        p0: 0.02,
        rr: 0.8,
        p_m: 0.025,
        rr_neg: 1.0,
        rr_pos: 0.8,
    };
    [base, base.with_rr_pos(0.7)]
}

/// The three subsampling columns `(total_n, rr_pos)`, each powered at about
/// 90% with full testing.
pub fn subsampling_columns() -> [TrialScenario; 3] {
    let base = TrialScenario::figure1();
    [
        base,
        base.with_total_n(75_000).with_rr_pos(0.8),
        base.with_total_n(50_000).with_rr_pos(0.7),
    ]
}

pub const NONEVENT_FRACTIONS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Subsampling design: control events tested at `f_event`, control
/// non-events at `f_nonevent`.
pub fn subsampling(scenario: TrialScenario, f_event: f64, f_nonevent: f64) -> SimConfig {
    SimConfig {
        mechanisms: Mechanisms {
            sampling: Some(SamplingPlan::two_phase(f_event, f_nonevent)),
            ..Default::default()
        },
        ..SimConfig::new(scenario)
    }
}

pub const NONDIFFERENTIAL_LOSS: [f64; 6] = [0.5, 0.4, 0.3, 0.2, 0.1, 0.0];
pub const DIFFERENTIAL_LOSS: [(f64, f64); 7] = [
    (0.5, 0.6),
    (0.4, 0.5),
    (0.3, 0.4),
    (0.2, 0.3),
    (0.1, 0.2),
    (0.0, 0.1),
    (0.0, 0.0),
];

/// Loss-of-signal design: worked example, 95% of control events and 50% of
/// control non-events tested.
pub fn loss_of_signal(loss_event: f64, loss_nonevent: f64, retest_correction: bool) -> SimConfig {
    let mut cfg = subsampling(TrialScenario::figure1(), 0.95, 0.5);
    cfg.mechanisms.degradation = Some(DegradationModel::new(loss_event, loss_nonevent));
    cfg.retest_correction = retest_correction;
    cfg
}

/// Non-compliance patterns as `(label, model)`.
pub fn noncompliance_patterns() -> [(&'static str, NonComplianceModel); 6] {
    let m = NonComplianceModel::by_arm_and_outcome;
    [
        ("perfect compliance", m(0.0, 0.0, 0.0, 0.0)),
        ("non-differential", m(0.3, 0.3, 0.3, 0.3)),
        ("differential by arm", m(0.2, 0.2, 0.3, 0.3)),
        ("differential by outcome", m(0.3, 0.1, 0.3, 0.1)),
        ("differential by outcome and arm", m(0.3, 0.15, 0.15, 0.3)),
        ("differential by outcome and arm, reversed", m(0.15, 0.3, 0.3, 0.15)),
    ]
}

/// Non-compliance design on the worked example with the compliance-ratio
/// correction enabled.
pub fn noncompliance(model: NonComplianceModel) -> SimConfig {
    SimConfig {
        mechanisms: Mechanisms {
            noncompliance: Some(model),
            ..Default::default()
        },
        compliance_correction: true,
        ..SimConfig::new(TrialScenario::figure1())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::analyze_power;

    #[test]
    fn subsampling_columns_are_near_ninety_percent() {
        for s in subsampling_columns() {
            let p = analyze_power(&s, 0.05).unwrap().power_pos;
            assert!((p - 0.9).abs() < 0.02, "{s:?}: {p}");
        }
    }

    #[test]
    fn designs_validate() {
        for (_, m) in noncompliance_patterns() {
            noncompliance(m).validate().unwrap();
        }
        for (e, n) in DIFFERENTIAL_LOSS {
            loss_of_signal(e, n, true).validate().unwrap();
        }
        for s in low_positivity_pair() {
            s.validate().unwrap();
        }
    }
}
