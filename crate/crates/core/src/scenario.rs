//! The seven generative trial parameters and the conditional outcome rates
//! they imply.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_probability, Error, Result};
use crate::tables::{TrialDecomposition, TwoByTwoTable};

/// Slack allowed before a solved rate counts as outside [0, 1].
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialScenario {
    /// Participants in both arms.
    pub total_n: u64,
    pub control_fraction: f64,
    /// Control-arm outcome rate, P₀(D+).
    pub p0: f64,
    /// Overall relative risk, screen over control.
    pub rr: f64,
    /// Probability of ever testing positive, P(M+).
    pub p_m: f64,
    pub rr_neg: f64,
    pub rr_pos: f64,
}

/// Control-arm outcome rates within each positivity class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRates {
    /// P₀(D+|M+)
    pub x: f64,
    /// P₀(D+|M−)
    pub y: f64,
}

impl ConditionalRates {
    /// P₁(D+|M+)
    pub fn screen_pos(&self, s: &TrialScenario) -> f64 {
        s.rr_pos * self.x
    }

    /// P₁(D+|M−)
    pub fn screen_neg(&self, s: &TrialScenario) -> f64 {
        s.rr_neg * self.y
    }
}

impl TrialScenario {
    /// The worked example with 50,000 per arm: P₀(D+) = 2%, RR = 0.9, 5%
    /// ever-positive, RR_neg = 1 and RR_pos = 13/15 (printed as 0.867).
    pub fn figure1() -> Self {
        Self {
            total_n: 100_000,
            control_fraction: 0.5,
            p0: 0.02,
            rr: 0.9,
            p_m: 0.05,
            rr_neg: 1.0,
            rr_pos: 13.0 / 15.0,
        }
    }

    pub fn with_total_n(mut self, total_n: u64) -> Self {
        self.total_n = total_n;
        self
    }

    pub fn with_rr_pos(mut self, rr_pos: f64) -> Self {
        self.rr_pos = rr_pos;
        self
    }

    pub fn with_rr_neg(mut self, rr_neg: f64) -> Self {
        self.rr_neg = rr_neg;
        self
    }

    pub fn with_p_m(mut self, p_m: f64) -> Self {
        self.p_m = p_m;
        self
    }

    pub fn with_rr(mut self, rr: f64) -> Self {
        self.rr = rr;
        self
    }

    /// Control-arm size (rounded), screen-arm size is the remainder.
    pub fn n_control(&self) -> u64 {
        ((self.total_n as f64) * self.control_fraction).round() as u64
    }

    pub fn n_screen(&self) -> u64 {
        self.total_n - self.n_control().min(self.total_n)
    }

    /// Checks parameter ranges; feasibility of the implied rates is checked
    /// by [`solve_rates`].
    pub fn validate(&self) -> Result<()> {
        if self.total_n < 2 {
            return Err(Error::InvalidParameter {
                name: "total_n",
                value: self.total_n as f64,
                reason: "need at least one participant per arm",
            });
        }
        check_open_unit("control_fraction", self.control_fraction)?;
        if self.n_control() == 0 || self.n_screen() == 0 {
            return Err(Error::InvalidParameter {
                name: "control_fraction",
                value: self.control_fraction,
                reason: "leaves an arm empty at this total_n",
            });
        }
        check_open_unit("p0", self.p0)?;
        check_probability("p_m", self.p_m)?;
        for (name, v) in [("rr", self.rr), ("rr_neg", self.rr_neg), ("rr_pos", self.rr_pos)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "relative risks must be positive and finite",
                });
            }
        }
        Ok(())
    }
}

fn clamp_unit(v: f64) -> Option<f64> {
    if v < -FEASIBILITY_TOL || v > 1.0 + FEASIBILITY_TOL || !v.is_finite() {
        None
    } else {
        Some(v.clamp(0.0, 1.0))
    }
}

const EFFECT_EQ_TOL: f64 = 1e-14;

/// Solve the two mixture equations
///
/// ```text
///     p_m·x + (1−p_m)·y               = p0
///     p_m·rr_pos·x + (1−p_m)·rr_neg·y = rr·p0
/// ```
///
/// for the control-arm conditional rates. When one positivity class is
/// empty, or `rr_pos = rr_neg`, the system is consistent only if the overall
/// RR equals the remaining stratum RR; the rates are then both `p0`.
pub fn solve_rates(s: &TrialScenario) -> Result<ConditionalRates> {
    s.validate()?;
    let TrialScenario {
        p0,
        rr,
        p_m,
        rr_neg,
        rr_pos,
        ..
    } = *s;

    let homogeneous = |name: &'static str, other: f64| -> Result<ConditionalRates> {
        if (rr - other).abs() <= 1e-12 {
            Ok(ConditionalRates { x: p0, y: p0 })
        } else {
            Err(Error::InvalidParameter {
                name,
                value: rr,
                reason: "overall rr is inconsistent with the stratum relative risks",
            })
        }
    };

    let (x, y) = if p_m == 1.0 {
        return check_screen(s, homogeneous("rr", rr_pos)?);
    } else if p_m == 0.0 {
        return check_screen(s, homogeneous("rr", rr_neg)?);
    } else if (rr_neg - rr_pos).abs() <= EFFECT_EQ_TOL {
        return check_screen(s, homogeneous("rr", rr_pos)?);
    } else {
        let denom = rr_neg - rr_pos;
        (
            p0 * (rr_neg - rr) / (p_m * denom),
            p0 * (rr - rr_pos) / ((1.0 - p_m) * denom),
        )
    };

    match (clamp_unit(x), clamp_unit(y)) {
        (Some(x), Some(y)) => check_screen(s, ConditionalRates { x, y }),
        _ => Err(Error::InfeasibleScenario { x, y }),
    }
}

fn check_screen(s: &TrialScenario, rates: ConditionalRates) -> Result<ConditionalRates> {
    let pos = rates.screen_pos(s);
    let neg = rates.screen_neg(s);
    if clamp_unit(pos).is_none() || clamp_unit(neg).is_none() {
        return Err(Error::InfeasibleScreenRates { pos, neg });
    }
    Ok(rates)
}

/// Expected cell counts (real-valued, unrounded) under perfect testing and
/// compliance. The unknown-positivity table is zero.
pub fn expected_decomposition(s: &TrialScenario) -> Result<TrialDecomposition> {
    let rates = solve_rates(s)?;
    let n1 = s.n_screen() as f64;
    let n0 = s.n_control() as f64;
    let pos = (rates.screen_pos(s)).min(1.0);
    let neg = (rates.screen_neg(s)).min(1.0);

    let ever1 = n1 * s.p_m;
    let ever0 = n0 * s.p_m;
    let never1 = n1 - ever1;
    let never0 = n0 - ever0;

    let ever = TwoByTwoTable::new(
        ever1 * pos,
        ever1 * (1.0 - pos),
        ever0 * rates.x,
        ever0 * (1.0 - rates.x),
    );
    let never = TwoByTwoTable::new(
        never1 * neg,
        never1 * (1.0 - neg),
        never0 * rates.y,
        never0 * (1.0 - rates.y),
    );
    Ok(TrialDecomposition::new(ever, never, TwoByTwoTable::ZERO))
}

/// Pooled outcome rate among ever-positives for equal arms,
///
/// ```text
///     0.5 · (p0/p_m) · (1 + rr_pos) · (rr_neg − rr)/(rr_neg − rr_pos)
/// ```
pub fn pooled_everpos_rate(s: &TrialScenario) -> Result<f64> {
    s.validate()?;
    if s.control_fraction != 0.5 {
        return Err(Error::InvalidParameter {
            name: "control_fraction",
            value: s.control_fraction,
            reason: "the closed form assumes equal arms",
        });
    }
    if (s.rr_neg - s.rr_pos).abs() <= EFFECT_EQ_TOL {
        return Err(Error::EqualStratumEffects(s.rr_pos));
    }
    if s.p_m == 0.0 {
        return Err(Error::InvalidParameter {
            name: "p_m",
            value: 0.0,
            reason: "no ever-positives",
        });
    }
    Ok(0.5 * (s.p0 / s.p_m) * (1.0 + s.rr_pos) * (s.rr_neg - s.rr) / (s.rr_neg - s.rr_pos))
}
