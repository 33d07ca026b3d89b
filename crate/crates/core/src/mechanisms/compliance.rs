//! Non-compliance (participants whose positivity is never observed) and the
//! compliance-ratio correction of the control arm.

use serde::{Deserialize, Serialize};

use super::Realize;
use crate::error::{Error, Result};
use crate::tables::{TrialDecomposition, TwoByTwoTable};

/// Non-compliance probability by arm and outcome. Non-compliers of either
/// positivity class land in the unknown-positivity table.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonComplianceModel {
    pub screen_event: f64,
    pub screen_nonevent: f64,
    pub control_event: f64,
    pub control_nonevent: f64,
}

impl NonComplianceModel {
    pub fn by_arm_and_outcome(
        screen_event: f64,
        screen_nonevent: f64,
        control_event: f64,
        control_nonevent: f64,
    ) -> Self {
        Self {
            screen_event,
            screen_nonevent,
            control_event,
            control_nonevent,
        }
    }

    /// Same rates in both arms.
    pub fn by_outcome(event: f64, nonevent: f64) -> Self {
        Self::by_arm_and_outcome(event, nonevent, event, nonevent)
    }

    /// Same rate for both outcomes within each arm.
    pub fn by_arm(screen: f64, control: f64) -> Self {
        Self::by_arm_and_outcome(screen, screen, control, control)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("screen_event", self.screen_event),
            ("screen_nonevent", self.screen_nonevent),
            ("control_event", self.control_event),
            ("control_nonevent", self.control_nonevent),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "non-compliance rate must lie in [0, 1)",
                });
            }
        }
        Ok(())
    }

    pub fn screen(&self, event: bool) -> f64 {
        if event {
            self.screen_event
        } else {
            self.screen_nonevent
        }
    }

    pub fn control(&self, event: bool) -> f64 {
        if event {
            self.control_event
        } else {
            self.control_nonevent
        }
    }
}

/// Thin every individual by arm and outcome; non-compliers move to the
/// unknown table, which must start empty.
pub fn apply_noncompliance(
    d: &TrialDecomposition,
    model: &NonComplianceModel,
    realize: &mut Realize,
) -> Result<TrialDecomposition> {
    model.validate()?;
    if !d.unknown.is_zero() {
        return Err(Error::InvalidParameter {
            name: "unknown",
            value: d.unknown.total(),
            reason: "non-compliance is applied to a decomposition with an empty unknown table",
        });
    }
    let keep = [
        1.0 - model.screen_event,
        1.0 - model.screen_nonevent,
        1.0 - model.control_event,
        1.0 - model.control_nonevent,
    ];
    let mut thin = |t: &TwoByTwoTable| {
        let c = t.cells();
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = realize.thin(c[i], keep[i]);
        }
        TwoByTwoTable::new(out[0], out[1], out[2], out[3])
    };
    let ever = thin(&d.ever);
    let never = thin(&d.never);
    let lost = |t: &TwoByTwoTable, kept: &TwoByTwoTable| {
        let (a, b) = (t.cells(), kept.cells());
        TwoByTwoTable::new(a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3])
    };
    let unknown = lost(&d.ever, &ever).add(&lost(&d.never, &never));
    Ok(TrialDecomposition::new(ever, never, unknown))
}

/// Per-outcome ratios `(c₊, c₋)` of screen-arm to control-arm compliance.
pub fn compliance_ratios(d: &TrialDecomposition) -> Result<(f64, f64)> {
    let compliance = |known: f64, unknown: f64| -> Result<f64> {
        let total = known + unknown;
        if total <= 0.0 || known <= 0.0 {
            return Err(Error::CorrectionUnavailable(
                "no compliers in an arm-by-outcome stratum",
            ));
        }
        Ok(known / total)
    };
    let known = d.ever.add(&d.never);
    let u = &d.unknown;
    let c_event = compliance(known.events_screen, u.events_screen)?
        / compliance(known.events_control, u.events_control)?;
    let c_nonevent = compliance(known.nonevents_screen, u.nonevents_screen)?
        / compliance(known.nonevents_control, u.nonevents_control)?;
    Ok((c_event, c_nonevent))
}

/// Scale the control arm's ever- and never-positive cells for each outcome
/// by the compliance ratio, giving the control arm the screen arm's
/// compliance pattern. The screen arm and the unknown table are unchanged.
pub fn compliance_ratio_correct(d: &TrialDecomposition) -> Result<TrialDecomposition> {
    let (c_event, c_nonevent) = compliance_ratios(d)?;
    let scale = |t: &TwoByTwoTable| TwoByTwoTable {
        events_control: t.events_control * c_event,
        nonevents_control: t.nonevents_control * c_nonevent,
        ..*t
    };
    Ok(TrialDecomposition::new(scale(&d.ever), scale(&d.never), d.unknown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{expected_decomposition, TrialScenario};
    use crate::tables::{decomposition_sum, relative_risk};

    fn fig1() -> TrialDecomposition {
        expected_decomposition(&TrialScenario::figure1()).unwrap()
    }

    fn expected(model: NonComplianceModel) -> TrialDecomposition {
        apply_noncompliance(&fig1(), &model, &mut Realize::Expected).unwrap()
    }

    #[test]
    fn arm_differential_example() {
        let d = expected(NonComplianceModel::by_arm(0.2, 0.3));
        assert!((d.ever.events_control - 525.0).abs() < 1e-9);
        assert!((d.unknown.events_control - 300.0).abs() < 1e-9);
        assert!((d.unknown.nonevents_control - 14_700.0).abs() < 1e-9);
        assert!(decomposition_sum(&d).max_abs_diff(&fig1().overall()) < 1e-9);

        let c = compliance_ratio_correct(&d).unwrap();
        assert!((c.ever.events_control - 600.0).abs() < 1e-10);
        assert!((relative_risk(&c.ever).unwrap() - 13.0 / 15.0).abs() < 1e-10);
        // Arm-differential non-compliance leaves both stratum RRs at their
        // perfect-compliance values, before and after correction.
        for t in [&d, &c] {
            assert!((relative_risk(&t.ever).unwrap() - 13.0 / 15.0).abs() < 1e-10);
            assert!((relative_risk(&t.never).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn outcome_differential_example() {
        let d = expected(NonComplianceModel::by_arm_and_outcome(0.4, 0.8, 0.8, 0.4));
        let (cp, cn) = compliance_ratios(&d).unwrap();
        assert!((cp - 3.0).abs() < 1e-12 && (cn - 1.0 / 3.0).abs() < 1e-12);
        assert!((relative_risk(&d.ever).unwrap() - 4.105).abs() < 5e-4);
        let c = compliance_ratio_correct(&d).unwrap();
        assert!((c.ever.events_control - 450.0).abs() < 1e-10);
        assert!((c.ever.nonevents_control - 350.0).abs() < 1e-10);
        let rr = relative_risk(&c.ever).unwrap();
        assert!((rr - 0.912_28).abs() < 5e-6, "{rr}");
        assert!((rr - 13.0 / 15.0).abs() > 0.04);
    }

    #[test]
    fn outcome_only_rates_give_published_positivity() {
        let d = expected(NonComplianceModel::by_outcome(0.3, 0.1));
        let compliers_c = d.ever.control_total() + d.never.control_total();
        let compliers_s = d.ever.screen_total() + d.never.screen_total();
        assert!((compliers_c - 44_800.0).abs() < 1e-9 && (compliers_s - 44_820.0).abs() < 1e-9);
        assert!((d.ever.control_total() - 2_100.0).abs() < 1e-9);
        assert!((d.ever.screen_total() - 2_120.0).abs() < 1e-9);
        assert!((d.ever.control_total() / compliers_c - 0.046_875).abs() < 1e-12);
        assert!((d.ever.screen_total() / compliers_s - 0.047_300).abs() < 5e-6);
        assert!((relative_risk(&d.ever).unwrap() - 0.858_5).abs() < 5e-5);
        let (cp, cn) = compliance_ratios(&d).unwrap();
        assert!((cp - 1.0).abs() < 1e-12 && (cn - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rates_are_identity() {
        let d = expected(NonComplianceModel::default());
        assert_eq!(d.ever, fig1().ever);
        assert!(d.unknown.is_zero());
        assert_eq!(compliance_ratio_correct(&d).unwrap(), d);
    }

    #[test]
    fn symmetric_rates_leave_correction_idle() {
        let d = expected(NonComplianceModel::by_outcome(0.25, 0.25));
        let c = compliance_ratio_correct(&d).unwrap();
        assert!(c.ever.max_abs_diff(&d.ever) < 1e-9);
    }

    #[test]
    fn rejects_full_noncompliance() {
        let m = NonComplianceModel::by_arm(1.0, 0.0);
        assert!(apply_noncompliance(&fig1(), &m, &mut Realize::Expected).is_err());
    }
}
