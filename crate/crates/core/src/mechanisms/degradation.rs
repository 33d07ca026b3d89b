//! Loss of signal in stored control-arm specimens and its correction by
//! retesting stored screen-arm specimens.

use serde::{Deserialize, Serialize};

use super::Realize;
use crate::error::{check_probability, Error, Result};
use crate::tables::{TrialDecomposition, TwoByTwoTable};

/// Probability that a true ever-positive in the control arm tests negative
/// on its stored specimen, by outcome. Gain of signal cannot occur.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationModel {
    pub loss_event: f64,
    pub loss_nonevent: f64,
}

impl DegradationModel {
    pub fn new(loss_event: f64, loss_nonevent: f64) -> Self {
        Self {
            loss_event,
            loss_nonevent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("loss_event", self.loss_event)?;
        check_probability("loss_nonevent", self.loss_nonevent)
    }

    pub fn loss(&self, event: bool) -> f64 {
        if event {
            self.loss_event
        } else {
            self.loss_nonevent
        }
    }
}

/// Move control-arm ever-positives to the never-positive table at the loss
/// rates. The screen arm tests fresh specimens and is left alone.
pub fn apply_degradation(
    d: &TrialDecomposition,
    model: &DegradationModel,
    realize: &mut Realize,
) -> Result<TrialDecomposition> {
    model.validate()?;
    let kept_events = realize.thin(d.ever.events_control, 1.0 - model.loss_event);
    let kept_nonevents = realize.thin(d.ever.nonevents_control, 1.0 - model.loss_nonevent);
    let lost_events = d.ever.events_control - kept_events;
    let lost_nonevents = d.ever.nonevents_control - kept_nonevents;
    Ok(TrialDecomposition::new(
        TwoByTwoTable {
            events_control: kept_events,
            nonevents_control: kept_nonevents,
            ..d.ever
        },
        TwoByTwoTable {
            events_control: d.never.events_control + lost_events,
            nonevents_control: d.never.nonevents_control + lost_nonevents,
            ..d.never
        },
        d.unknown,
    ))
}

/// Share of screen-arm fresh-specimen positives whose stored specimen also
/// tests positive, P₁(M̃+|M+,D±), with the counts it was estimated from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetestFractions {
    pub r_event: f64,
    pub r_nonevent: f64,
    pub basis_event: f64,
    pub basis_nonevent: f64,
}

impl RetestFractions {
    pub fn exact(r_event: f64, r_nonevent: f64) -> Self {
        Self {
            r_event,
            r_nonevent,
            basis_event: f64::INFINITY,
            basis_nonevent: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("r_event", self.r_event), ("r_nonevent", self.r_nonevent)] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: r,
                    reason: "retest-positive fraction must lie in (0, 1]",
                });
            }
        }
        Ok(())
    }
}

/// Retest the stored specimens of screen-arm ever-positives
/// `(events, nonevents)` under the same loss rates as the control arm.
pub fn estimate_retest_fractions(
    screen_everpos: (f64, f64),
    model: &DegradationModel,
    realize: &mut Realize,
) -> Result<RetestFractions> {
    model.validate()?;
    let (events, nonevents) = screen_everpos;
    if events <= 0.0 || nonevents <= 0.0 {
        return Err(Error::CorrectionUnavailable(
            "no screen-arm ever-positives to retest in an outcome stratum",
        ));
    }
    let r_event = realize.thin(events, 1.0 - model.loss_event) / events;
    let r_nonevent = realize.thin(nonevents, 1.0 - model.loss_nonevent) / nonevents;
    if r_event == 0.0 || r_nonevent == 0.0 {
        return Err(Error::CorrectionUnavailable("no stored specimen retested positive"));
    }
    Ok(RetestFractions {
        r_event,
        r_nonevent,
        basis_event: events,
        basis_nonevent: nonevents,
    })
}

/// Corrected rate plus whether noise pushed a positivity ratio past 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampedRate {
    pub rate: f64,
    pub clamped: bool,
}

/// P₀(D+|M+) from observed stored-specimen positivity `(P₀(M̃+|D+),
/// P₀(M̃+|D−))`, outcome rates `(P₀(D+), P₀(D−))`, and retest fractions:
///
/// ```text
///     {1 + P₀(D−)/P₀(D+) · [P₀(M̃+|D−)/r−] / [P₀(M̃+|D+)/r+]}⁻¹
/// ```
pub fn retest_correct_pos(
    observed_positivity: (f64, f64),
    base_rates: (f64, f64),
    r: &RetestFractions,
) -> Result<f64> {
    r.validate()?;
    let (m_event, m_nonevent) = observed_positivity;
    let (p_event, p_nonevent) = base_rates;
    if m_event <= 0.0 || p_event <= 0.0 {
        return Err(Error::CorrectionUnavailable(
            "no observed positives among control-arm events",
        ));
    }
    let bayes_factor = (m_nonevent / r.r_nonevent) / (m_event / r.r_event);
    Ok(1.0 / (1.0 + p_nonevent / p_event * bayes_factor))
}

/// P₀(D+|M−) by the same substitution, using the never-positive shares
/// `1 − P₀(M̃+|D±)/r±`. A share below 0 (noise) is clamped and flagged.
pub fn retest_correct_neg(
    observed_positivity: (f64, f64),
    base_rates: (f64, f64),
    r: &RetestFractions,
) -> Result<ClampedRate> {
    r.validate()?;
    let (m_event, m_nonevent) = observed_positivity;
    let (p_event, p_nonevent) = base_rates;
    let mut clamped = false;
    let mut never_share = |m: f64, r: f64| {
        let ratio = m / r;
        if ratio > 1.0 {
            clamped = true;
            0.0
        } else {
            1.0 - ratio
        }
    };
    let ev = p_event * never_share(m_event, r.r_event);
    let nev = p_nonevent * never_share(m_nonevent, r.r_nonevent);
    if ev + nev <= 0.0 {
        return Err(Error::CorrectionUnavailable("no corrected never-positives"));
    }
    Ok(ClampedRate {
        rate: ev / (ev + nev),
        clamped,
    })
}
