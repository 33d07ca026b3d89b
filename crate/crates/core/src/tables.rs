//! Outcome-by-arm 2×2 tables and the estimators computed from them.
//!
//! Cells are real-valued so that weighted (IPW) and ratio-corrected tables
//! go through the same estimators as raw counts.

use serde::{Deserialize, Serialize};

use crate::error::{Arm, Error, Result};
use crate::normal;

/// Outcome (rows: D+ / D−) by arm (columns: screen / control).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwoByTwoTable {
    pub events_screen: f64,
    pub nonevents_screen: f64,
    pub events_control: f64,
    pub nonevents_control: f64,
}

impl TwoByTwoTable {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(
        events_screen: f64,
        nonevents_screen: f64,
        events_control: f64,
        nonevents_control: f64,
    ) -> Self {
        Self {
            events_screen,
            nonevents_screen,
            events_control,
            nonevents_control,
        }
    }

    /// Checked constructor: every cell must be finite and non-negative.
    pub fn try_new(
        events_screen: f64,
        nonevents_screen: f64,
        events_control: f64,
        nonevents_control: f64,
    ) -> Result<Self> {
        let t = Self::new(events_screen, nonevents_screen, events_control, nonevents_control);
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("events_screen", self.events_screen),
            ("nonevents_screen", self.nonevents_screen),
            ("events_control", self.events_control),
            ("nonevents_control", self.nonevents_control),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "table cells must be finite and non-negative",
                });
            }
        }
        Ok(())
    }

    pub fn screen_total(&self) -> f64 {
        self.events_screen + self.nonevents_screen
    }

    pub fn control_total(&self) -> f64 {
        self.events_control + self.nonevents_control
    }

    pub fn total(&self) -> f64 {
        self.screen_total() + self.control_total()
    }

    pub fn total_events(&self) -> f64 {
        self.events_screen + self.events_control
    }

    /// Cell-wise sum.
    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            self.events_screen + other.events_screen,
            self.nonevents_screen + other.nonevents_screen,
            self.events_control + other.events_control,
            self.nonevents_control + other.nonevents_control,
        )
    }

    /// Swap the two arms.
    pub fn swapped(&self) -> Self {
        Self::new(
            self.events_control,
            self.nonevents_control,
            self.events_screen,
            self.nonevents_screen,
        )
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn cells(&self) -> [f64; 4] {
        [
            self.events_screen,
            self.nonevents_screen,
            self.events_control,
            self.nonevents_control,
        ]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.cells()
            .iter()
            .zip(other.cells())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Ever-positive, never-positive, and unknown-positivity tables. Their
/// cell-wise sum is the overall trial table.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialDecomposition {
    pub ever: TwoByTwoTable,
    pub never: TwoByTwoTable,
    pub unknown: TwoByTwoTable,
}

impl TrialDecomposition {
    pub fn new(ever: TwoByTwoTable, never: TwoByTwoTable, unknown: TwoByTwoTable) -> Self {
        Self {
            ever,
            never,
            unknown,
        }
    }

    pub fn overall(&self) -> TwoByTwoTable {
        decomposition_sum(self)
    }
}

pub fn decomposition_sum(d: &TrialDecomposition) -> TwoByTwoTable {
    d.ever.add(&d.never).add(&d.unknown)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimand {
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "RD")]
    Rd,
    #[serde(rename = "RR_pos")]
    RrPos,
    #[serde(rename = "RD_pos")]
    RdPos,
    #[serde(rename = "RR_neg")]
    RrNeg,
    #[serde(rename = "RD_neg")]
    RdNeg,
}

impl Estimand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimand::Rr => "RR",
            Estimand::Rd => "RD",
            Estimand::RrPos => "RR_pos",
            Estimand::RdPos => "RD_pos",
            Estimand::RrNeg => "RR_neg",
            Estimand::RdNeg => "RD_neg",
        }
    }
}

impl std::fmt::Display for Estimand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Point estimate with its pooled-null Z test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub label: Estimand,
    pub point: f64,
    /// Null-pooled event rate.
    pub pooled_rate: f64,
    /// Standard error of the risk difference under the null.
    pub se_null: f64,
    pub z: f64,
    pub p_two_sided: f64,
}

/// Two-sided p-value for a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * normal::sf(z.abs())).min(1.0)
}

/// Observed event rates `(p_screen, p_control)`.
pub fn risk_rates(table: &TwoByTwoTable) -> Result<(f64, f64)> {
    let n1 = table.screen_total();
    let n0 = table.control_total();
    if n1 <= 0.0 {
        return Err(Error::EmptyArm { arm: Arm::Screen });
    }
    if n0 <= 0.0 {
        return Err(Error::EmptyArm { arm: Arm::Control });
    }
    Ok((table.events_screen / n1, table.events_control / n0))
}

/// Screen-arm rate over control-arm rate.
pub fn relative_risk(table: &TwoByTwoTable) -> Result<f64> {
    let (p1, p0) = risk_rates(table)?;
    if table.events_control <= 0.0 {
        return Err(Error::UndefinedRelativeRisk);
    }
    Ok(p1 / p0)
}

/// Control-arm rate minus screen-arm rate (positive when screening helps).
pub fn risk_difference(table: &TwoByTwoTable) -> Result<f64> {
    let (p1, p0) = risk_rates(table)?;
    Ok(p0 - p1)
}

/// Null-pooled event rate and the standard error of the risk difference
/// under the null, `sqrt(π(1−π)(1/n₁ + 1/n₀))`.
pub fn pooled_null_se(table: &TwoByTwoTable) -> Result<(f64, f64)> {
    let n1 = table.screen_total();
    let n0 = table.control_total();
    if n1 <= 0.0 {
        return Err(Error::EmptyArm { arm: Arm::Screen });
    }
    if n0 <= 0.0 {
        return Err(Error::EmptyArm { arm: Arm::Control });
    }
    let pooled = table.total_events() / (n1 + n0);
    if !(pooled > 0.0 && pooled < 1.0) {
        return Err(Error::DegenerateTable { pooled });
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n0)).sqrt();
    Ok((pooled, se))
}

/// Risk difference with the pooled-variance Z test.
///
/// `point` is the risk difference; callers that report a relative risk
/// overwrite `label` and `point` (see [`estimate`]).
pub fn pooled_z_test(table: &TwoByTwoTable) -> Result<EstimateResult> {
    let rd = risk_difference(table)?;
    let (pooled, se) = pooled_null_se(table)?;
    let z = rd / se;
    Ok(EstimateResult {
        label: Estimand::Rd,
        point: rd,
        pooled_rate: pooled,
        se_null: se,
        z,
        p_two_sided: two_sided_p(z),
    })
}

/// Named estimate on a table: relative-risk labels report the RR as the
/// point value, risk-difference labels the RD. The test is always the
/// pooled Z test of the risk difference.
pub fn estimate(table: &TwoByTwoTable, label: Estimand) -> Result<EstimateResult> {
    let mut res = pooled_z_test(table)?;
    res.label = label;
    if matches!(label, Estimand::Rr | Estimand::RrPos | Estimand::RrNeg) {
        res.point = relative_risk(table)?;
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG1_OVERALL: TwoByTwoTable =
        TwoByTwoTable::new(900.0, 49_100.0, 1_000.0, 49_000.0);
    pub(crate) const FIG1_EVER: TwoByTwoTable =
        TwoByTwoTable::new(650.0, 1_850.0, 750.0, 1_750.0);
    pub(crate) const FIG1_NEVER: TwoByTwoTable =
        TwoByTwoTable::new(250.0, 47_250.0, 250.0, 47_250.0);

    #[test]
    fn risk_rates_examples() {
        let (p1, p0) = risk_rates(&FIG1_OVERALL).unwrap();
        assert!((p1 - 0.018).abs() < 1e-15 && (p0 - 0.020).abs() < 1e-15);
        assert_eq!(
            risk_rates(&TwoByTwoTable::new(0.0, 10.0, 0.0, 10.0)).unwrap(),
            (0.0, 0.0)
        );
        let (p1, p0) = risk_rates(&FIG1_EVER).unwrap();
        assert!((p1 - 0.26).abs() < 1e-15 && (p0 - 0.30).abs() < 1e-15);
    }

    #[test]
    fn empty_arm_is_named() {
        let err = risk_rates(&TwoByTwoTable::new(0.0, 0.0, 1.0, 2.0)).unwrap_err();
        assert_eq!(err, Error::EmptyArm { arm: Arm::Screen });
        let err = risk_rates(&TwoByTwoTable::new(1.0, 2.0, 0.0, 0.0)).unwrap_err();
        assert_eq!(err, Error::EmptyArm { arm: Arm::Control });
    }

    #[test]
    fn relative_risk_examples() {
        assert!((relative_risk(&FIG1_OVERALL).unwrap() - 0.9).abs() < 1e-12);
        assert!((relative_risk(&FIG1_EVER).unwrap() - 0.866_666_666_666_666_7).abs() < 1e-12);
        let same = TwoByTwoTable::new(12.0, 88.0, 12.0, 88.0);
        assert_eq!(relative_risk(&same).unwrap(), 1.0);
        assert_eq!(
            relative_risk(&TwoByTwoTable::new(3.0, 10.0, 0.0, 10.0)).unwrap_err(),
            Error::UndefinedRelativeRisk
        );
    }

    #[test]
    fn risk_difference_examples() {
        assert!((risk_difference(&FIG1_OVERALL).unwrap() - 0.002).abs() < 1e-15);
        assert!((risk_difference(&FIG1_EVER).unwrap() - 0.04).abs() < 1e-15);
        let same = TwoByTwoTable::new(5.0, 95.0, 5.0, 95.0);
        assert_eq!(risk_difference(&same).unwrap(), 0.0);
    }

    #[test]
    fn pooled_z_examples() {
        let ever = pooled_z_test(&FIG1_EVER).unwrap();
        assert!((ever.pooled_rate - 0.28).abs() < 1e-15);
        assert!((ever.z - 3.149_6).abs() < 2e-4, "z = {}", ever.z);
        assert!((ever.p_two_sided - 0.001_63).abs() < 1e-5, "p = {}", ever.p_two_sided);

        let overall = pooled_z_test(&FIG1_OVERALL).unwrap();
        assert!((overall.z - 2.316_3).abs() < 5e-5, "z = {}", overall.z);
        assert!((overall.p_two_sided - 0.020_6).abs() < 1e-4);

        let same = pooled_z_test(&TwoByTwoTable::new(5.0, 95.0, 5.0, 95.0)).unwrap();
        assert_eq!(same.z, 0.0);
        assert_eq!(same.p_two_sided, 1.0);
    }

    #[test]
    fn pooled_z_rejects_degenerate() {
        let none = TwoByTwoTable::new(0.0, 10.0, 0.0, 10.0);
        assert!(matches!(
            pooled_z_test(&none),
            Err(Error::DegenerateTable { pooled }) if pooled == 0.0
        ));
        let all = TwoByTwoTable::new(10.0, 0.0, 4.0, 0.0);
        assert!(matches!(pooled_z_test(&all), Err(Error::DegenerateTable { .. })));
    }

    #[test]
    fn decomposition_sum_examples() {
        let d = TrialDecomposition::new(FIG1_EVER, FIG1_NEVER, TwoByTwoTable::ZERO);
        assert_eq!(decomposition_sum(&d), FIG1_OVERALL);
        assert_eq!(
            decomposition_sum(&TrialDecomposition::default()),
            TwoByTwoTable::ZERO
        );
        // Non-compliance example: screen 20%, control 30% non-compliant.
        let s2 = TrialDecomposition::new(
            TwoByTwoTable::new(520.0, 1_480.0, 525.0, 1_225.0),
            TwoByTwoTable::new(200.0, 37_800.0, 175.0, 33_075.0),
            TwoByTwoTable::new(180.0, 9_820.0, 300.0, 14_700.0),
        );
        assert_eq!(decomposition_sum(&s2), FIG1_OVERALL);
    }

    #[test]
    fn estimate_labels() {
        let rr = estimate(&FIG1_EVER, Estimand::RrPos).unwrap();
        assert_eq!(rr.label, Estimand::RrPos);
        assert!((rr.point - 13.0 / 15.0).abs() < 1e-12);
        let rd = estimate(&FIG1_NEVER, Estimand::RdNeg).unwrap();
        assert_eq!(rd.point, 0.0);
        assert_eq!(rd.p_two_sided, 1.0);
    }

    #[test]
    fn try_new_rejects_negative() {
        assert!(TwoByTwoTable::try_new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(TwoByTwoTable::try_new(1.0, f64::NAN, 0.0, 0.0).is_err());
        assert!(TwoByTwoTable::try_new(0.5, 1.5, 2.0, 3.0).is_ok());
    }
}
