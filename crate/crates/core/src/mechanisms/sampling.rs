//! Stratified subsampling of stored control-arm specimens and the
//! inverse-probability-weighted reconstruction of the ever-positive column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingStratum {
    pub label: String,
    pub fraction: f64,
}

/// Strata with their testing fractions. The first stratum is always the
/// control-arm participants with a trial outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    pub strata: Vec<SamplingStratum>,
}

pub const EVENT_STRATUM: &str = "control events";
pub const NONEVENT_STRATUM: &str = "control non-events";

impl SamplingPlan {
    /// Control events tested at `f_event`, control non-events at
    /// `f_nonevent`.
    pub fn two_phase(f_event: f64, f_nonevent: f64) -> Self {
        Self {
            strata: vec![
                SamplingStratum {
                    label: EVENT_STRATUM.into(),
                    fraction: f_event,
                },
                SamplingStratum {
                    label: NONEVENT_STRATUM.into(),
                    fraction: f_nonevent,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strata.is_empty() {
            return Err(Error::InvalidPlan("no strata".into()));
        }
        for (i, s) in self.strata.iter().enumerate() {
            if !(s.fraction > 0.0 && s.fraction <= 1.0) {
                return Err(Error::InvalidPlan(format!(
                    "stratum `{}` fraction {} is outside (0, 1]",
                    s.label, s.fraction
                )));
            }
            if self.strata[..i].iter().any(|t| t.label == s.label) {
                return Err(Error::InvalidPlan(format!("duplicate stratum `{}`", s.label)));
            }
        }
        Ok(())
    }

    /// `(f_event, f_nonevent)` for a plan split by outcome only.
    pub fn two_phase_fractions(&self) -> Result<(f64, f64)> {
        self.validate()?;
        match self.strata.as_slice() {
            [e, n] => Ok((e.fraction, n.fraction)),
            _ => Err(Error::InvalidPlan(format!(
                "the simulator splits control specimens by outcome only; expected 2 strata, got {}",
                self.strata.len()
            ))),
        }
    }
}

/// Tallies for one stratum. In the event stratum every positive is an
/// event, so `observed_positive` there is D₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumCounts {
    /// People in the stratum, sampled or not.
    pub stratum_n: f64,
    pub sampled_n: f64,
    /// Sampled specimens testing positive, M_s.
    pub observed_positive: f64,
}

/// Which fraction divides the counts: the plan's target or the share that
/// was actually sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionBasis {
    Planned,
    Realized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpwEstimate {
    /// D̂₁
    pub events: f64,
    /// M̂
    pub ever_positive: f64,
    /// P₀(D+|M+) = D̂₁ / M̂
    pub p0_pos: f64,
}

impl IpwEstimate {
    /// Weighted control ever-positive column `(events, nonevents)`.
    pub fn control_column(&self) -> (f64, f64) {
        (self.events, self.ever_positive - self.events)
    }
}

/// IPW reconstruction: D̂₁ = D₁/f₁ and M̂ = D̂₁ + Σ_{s≥2} M_s/f_s.
pub fn ipw_estimate(
    counts: &[StratumCounts],
    plan: &SamplingPlan,
    basis: FractionBasis,
) -> Result<IpwEstimate> {
    plan.validate()?;
    if counts.len() != plan.strata.len() {
        return Err(Error::InvalidPlan(format!(
            "{} strata in the plan but {} stratum counts",
            plan.strata.len(),
            counts.len()
        )));
    }
    let mut weighted = Vec::with_capacity(counts.len());
    for (c, s) in counts.iter().zip(&plan.strata) {
        if c.observed_positive > c.sampled_n || c.sampled_n > c.stratum_n {
            return Err(Error::InvalidPlan(format!(
                "stratum `{}`: need observed_positive <= sampled_n <= stratum_n",
                s.label
            )));
        }
        let f = match basis {
            FractionBasis::Planned => s.fraction,
            FractionBasis::Realized => {
                if c.sampled_n <= 0.0 {
                    if c.observed_positive == 0.0 && c.stratum_n == 0.0 {
                        weighted.push(0.0);
                        continue;
                    }
                    return Err(Error::CorrectionUnavailable("a stratum has no sampled specimens"));
                }
                c.sampled_n / c.stratum_n
            }
        };
        weighted.push(c.observed_positive / f);
    }
    let events = weighted[0];
    let ever_positive: f64 = weighted.iter().sum();
    if ever_positive <= 0.0 {
        return Err(Error::CorrectionUnavailable("no sampled ever-positive specimens"));
    }
    Ok(IpwEstimate {
        events,
        ever_positive,
        p0_pos: events / ever_positive,
    })
}
