//! What a trial actually observes after the mechanism layers, the
//! reconstruction of ever/never-positive tables from it, and the test on
//! the reconstructed tables.
//!
//! When the reconstruction estimates anything (IPW weights, retest
//! fractions, compliance ratios) the pooled-null variance understates the
//! spread of the risk difference. The test then inflates it by the delta
//! method: every primitive count is treated as an independent Poisson
//! variable, and the design variance is `Σ (∂RD/∂xᵢ)² xᵢ`. Subtracting the
//! naive binomial variance of the reconstructed table and adding back the
//! pooled-null variance keeps the null calibration of the usual test; with
//! nothing estimated the two extra terms cancel.

use serde::{Deserialize, Serialize};

use super::RetestFractions;
use crate::error::{Error, Result};
use crate::tables::{
    estimate, pooled_null_se, relative_risk, risk_difference, risk_rates, two_sided_p, Estimand,
    EstimateResult, TrialDecomposition, TwoByTwoTable,
};

/// Screen-arm counts for one outcome. Ever-positives are split by the
/// stored-specimen retest; with no retest they all sit in `retest_pos`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScreenCounts {
    pub retest_pos: f64,
    pub retest_neg: f64,
    pub never: f64,
    pub unknown: f64,
}

impl ScreenCounts {
    pub fn ever(&self) -> f64 {
        self.retest_pos + self.retest_neg
    }
}

/// Control-arm counts for one outcome.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCounts {
    /// Sampled stored specimens testing positive.
    pub sampled_pos: f64,
    pub sampled_neg: f64,
    /// Compliers whose specimen was not tested.
    pub unsampled: f64,
    pub unknown: f64,
}

impl ControlCounts {
    pub fn compliers(&self) -> f64 {
        self.sampled_pos + self.sampled_neg + self.unsampled
    }
}

/// Observed counts, indexed `[event, nonevent]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservedTrial {
    pub screen: [ScreenCounts; 2],
    pub control: [ControlCounts; 2],
}

/// Which corrections the reconstruction applies. Reweighting by the
/// realized sampling fractions always happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corrections {
    pub retest: bool,
    pub compliance: bool,
}

impl Corrections {
    pub const NONE: Self = Self {
        retest: false,
        compliance: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Ever,
    Never,
}

const SLOTS: usize = 16;

impl ObservedTrial {
    /// Counts as observed with full testing: the decomposition's control
    /// cells are taken as tested specimens. Retest fractions, when given,
    /// split the screen-arm ever-positives.
    pub fn from_decomposition(d: &TrialDecomposition, retest: Option<&RetestFractions>) -> Result<Self> {
        d.ever.validate()?;
        d.never.validate()?;
        d.unknown.validate()?;
        if let Some(r) = retest {
            r.validate()?;
        }
        let mut out = Self::default();
        for (i, event) in [true, false].into_iter().enumerate() {
            let pick = |t: &TwoByTwoTable| {
                if event {
                    (t.events_screen, t.events_control)
                } else {
                    (t.nonevents_screen, t.nonevents_control)
                }
            };
            let (ever_s, ever_c) = pick(&d.ever);
            let (never_s, never_c) = pick(&d.never);
            let (unk_s, unk_c) = pick(&d.unknown);
            let r = retest.map_or(1.0, |r| if event { r.r_event } else { r.r_nonevent });
            out.screen[i] = ScreenCounts {
                retest_pos: ever_s * r,
                retest_neg: ever_s * (1.0 - r),
                never: never_s,
                unknown: unk_s,
            };
            out.control[i] = ControlCounts {
                sampled_pos: ever_c,
                sampled_neg: never_c,
                unsampled: 0.0,
                unknown: unk_c,
            };
        }
        Ok(out)
    }

    /// Primitive counts in a fixed order.
    pub fn slots(&self) -> [f64; SLOTS] {
        let mut out = [0.0; SLOTS];
        for i in 0..2 {
            let s = &self.screen[i];
            let c = &self.control[i];
            out[8 * i..8 * i + 8].copy_from_slice(&[
                s.retest_pos,
                s.retest_neg,
                s.never,
                s.unknown,
                c.sampled_pos,
                c.sampled_neg,
                c.unsampled,
                c.unknown,
            ]);
        }
        out
    }

    fn from_slots(v: &[f64; SLOTS]) -> Self {
        let mut out = Self::default();
        for i in 0..2 {
            let x = &v[8 * i..8 * i + 8];
            out.screen[i] = ScreenCounts {
                retest_pos: x[0],
                retest_neg: x[1],
                never: x[2],
                unknown: x[3],
            };
            out.control[i] = ControlCounts {
                sampled_pos: x[4],
                sampled_neg: x[5],
                unsampled: x[6],
                unknown: x[7],
            };
        }
        out
    }

    /// True when the reconstruction estimates weights or ratios, so the
    /// test needs the design variance.
    pub fn needs_design_variance(&self, c: Corrections) -> bool {
        c.retest || c.compliance || self.control.iter().any(|k| k.unsampled > 0.0)
    }

    /// Retest-positive share among screen-arm ever-positives.
    pub fn retest_fractions(&self) -> Result<RetestFractions> {
        let share = |s: &ScreenCounts| -> Result<f64> {
            if s.ever() <= 0.0 || s.retest_pos <= 0.0 {
                return Err(Error::CorrectionUnavailable(
                    "no screen-arm stored specimen retested positive in an outcome stratum",
                ));
            }
            Ok(s.retest_pos / s.ever())
        };
        Ok(RetestFractions {
            r_event: share(&self.screen[0])?,
            r_nonevent: share(&self.screen[1])?,
            basis_event: self.screen[0].ever(),
            basis_nonevent: self.screen[1].ever(),
        })
    }

    /// Ever/never/unknown tables after reweighting and the requested
    /// corrections.
    pub fn reconstruct(&self, c: Corrections) -> Result<TrialDecomposition> {
        let retest = if c.retest {
            Some(self.retest_fractions()?)
        } else {
            None
        };
        let mut ever = [0.0; 4];
        let mut never = [0.0; 4];
        let mut unknown = [0.0; 4];
        for i in 0..2 {
            let s = &self.screen[i];
            let k = &self.control[i];
            let compliers = k.compliers();
            let tested = k.sampled_pos + k.sampled_neg;
            let mut ev = if compliers == 0.0 {
                0.0
            } else if tested > 0.0 {
                k.sampled_pos * compliers / tested
            } else {
                return Err(Error::CorrectionUnavailable(
                    "no tested control specimens in an outcome stratum",
                ));
            };
            if let Some(r) = &retest {
                ev /= if i == 0 { r.r_event } else { r.r_nonevent };
                ev = ev.min(compliers);
            }
            let mut nv = compliers - ev;
            if c.compliance {
                let screen_known = s.ever() + s.never;
                let screen_total = screen_known + s.unknown;
                let control_total = compliers + k.unknown;
                if screen_known <= 0.0 || compliers <= 0.0 {
                    return Err(Error::CorrectionUnavailable(
                        "no compliers in an arm-by-outcome stratum",
                    ));
                }
                let ratio = (screen_known / screen_total) / (compliers / control_total);
                ev *= ratio;
                nv *= ratio;
            }
            // Table cells: [events_screen, nonevents_screen, events_control, nonevents_control].
            ever[i] = s.ever();
            ever[2 + i] = ev;
            never[i] = s.never;
            never[2 + i] = nv;
            unknown[i] = s.unknown;
            unknown[2 + i] = k.unknown;
        }
        let table = |v: [f64; 4]| TwoByTwoTable::new(v[0], v[1], v[2], v[3]);
        Ok(TrialDecomposition::new(table(ever), table(never), table(unknown)))
    }

    fn stratum_rd(&self, stratum: Stratum, c: Corrections) -> Result<f64> {
        let d = self.reconstruct(c)?;
        risk_difference(pick(&d, stratum))
    }

    /// Relative risk in `stratum` with its test. Uses the pooled Z test when
    /// nothing is estimated and the design-adjusted test otherwise.
    pub fn test(&self, stratum: Stratum, c: Corrections) -> Result<EstimateResult> {
        let label = match stratum {
            Stratum::Ever => Estimand::RrPos,
            Stratum::Never => Estimand::RrNeg,
        };
        let d = self.reconstruct(c)?;
        let table = pick(&d, stratum);
        if !self.needs_design_variance(c) {
            return estimate(table, label);
        }

        let rd = risk_difference(table)?;
        let (pooled, se_pooled) = pooled_null_se(table)?;
        let (p1, p0) = risk_rates(table)?;
        let naive = p1 * (1.0 - p1) / table.screen_total() + p0 * (1.0 - p0) / table.control_total();

        let base = self.slots();
        let mut design = 0.0;
        for (i, &x) in base.iter().enumerate() {
            if x <= 0.0 {
                continue;
            }
            let h = 1e-5 * x;
            let mut up = base;
            let mut down = base;
            up[i] = x + h;
            down[i] = x - h;
            let g = (Self::from_slots(&up).stratum_rd(stratum, c)?
                - Self::from_slots(&down).stratum_rd(stratum, c)?)
                / (2.0 * h);
            design += g * g * x;
        }

        let var = se_pooled * se_pooled + design - naive;
        if !(var > 0.0) {
            return Err(Error::DegenerateTable { pooled });
        }
        let se = var.sqrt();
        let z = rd / se;
        Ok(EstimateResult {
            label,
            point: relative_risk(table)?,
            pooled_rate: pooled,
            se_null: se,
            z,
            p_two_sided: two_sided_p(z),
        })
    }
}

fn pick(d: &TrialDecomposition, stratum: Stratum) -> &TwoByTwoTable {
    match stratum {
        Stratum::Ever => &d.ever,
        Stratum::Never => &d.never,
    }
}
