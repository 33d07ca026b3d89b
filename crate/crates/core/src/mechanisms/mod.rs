//! Measurement mechanisms layered on a true trial decomposition: stored
//! specimen subsampling, loss of signal in stored specimens, and
//! non-compliance. Each comes in an expected-value form and a per-replicate
//! random form selected by [`Realize`].

mod compliance;
mod degradation;
mod observed;
mod sampling;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use compliance::{apply_noncompliance, compliance_ratio_correct, compliance_ratios, NonComplianceModel};
pub use degradation::{
    apply_degradation, estimate_retest_fractions, retest_correct_neg, retest_correct_pos,
    ClampedRate, DegradationModel, RetestFractions,
};
pub use observed::{ControlCounts, Corrections, ObservedTrial, ScreenCounts, Stratum};
pub use sampling::{ipw_estimate, FractionBasis, IpwEstimate, SamplingPlan, SamplingStratum, StratumCounts};

use crate::error::Result;
use crate::random::binomial;
use crate::tables::TrialDecomposition;

/// Whether a mechanism moves expected mass or draws a random replicate.
pub enum Realize<'a> {
    Expected,
    Sample(&'a mut dyn RngCore),
}

impl Realize<'_> {
    /// Number kept when each of `n` units survives with probability `keep`.
    /// Counts are rounded to integers before a random draw.
    pub fn thin(&mut self, n: f64, keep: f64) -> f64 {
        match self {
            Realize::Expected => n * keep,
            Realize::Sample(rng) => binomial(&mut **rng, n.round().max(0.0) as u64, keep) as f64,
        }
    }
}

/// The optional mechanism layers of one simulated design.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mechanisms {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<DegradationModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noncompliance: Option<NonComplianceModel>,
}

impl Mechanisms {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.sampling {
            p.validate()?;
            p.two_phase_fractions()?;
        }
        if let Some(d) = &self.degradation {
            d.validate()?;
        }
        if let Some(n) = &self.noncompliance {
            n.validate()?;
        }
        Ok(())
    }
}

/// Run the mechanism layers over a true decomposition and return what the
/// trial would observe. Order: non-compliance, then loss of signal in the
/// control arm's stored specimens (with screen-arm retests), then
/// subsampling of control specimens by outcome.
pub fn observe(
    truth: &TrialDecomposition,
    mech: &Mechanisms,
    realize: &mut Realize,
) -> Result<ObservedTrial> {
    mech.validate()?;
    let fractions = match &mech.sampling {
        Some(p) => Some(p.two_phase_fractions()?),
        None => None,
    };
    let nc = mech.noncompliance.unwrap_or_default();

    let mut screen = [ScreenCounts::default(); 2];
    let mut control = [ControlCounts::default(); 2];
    for (i, event) in [true, false].into_iter().enumerate() {
        let pick = |t: &crate::tables::TwoByTwoTable| {
            if event {
                (t.events_screen, t.events_control)
            } else {
                (t.nonevents_screen, t.nonevents_control)
            }
        };
        let (ever_s, ever_c) = pick(&truth.ever);
        let (never_s, never_c) = pick(&truth.never);
        let (unk_s, unk_c) = pick(&truth.unknown);

        let rate_s = nc.screen(event);
        let e1 = realize.thin(ever_s, 1.0 - rate_s);
        let n1 = realize.thin(never_s, 1.0 - rate_s);
        let u1 = unk_s + (ever_s - e1) + (never_s - n1);

        let rate_c = nc.control(event);
        let e0 = realize.thin(ever_c, 1.0 - rate_c);
        let n0 = realize.thin(never_c, 1.0 - rate_c);
        let u0 = unk_c + (ever_c - e0) + (never_c - n0);

        let (retest_pos, pos, neg) = match &mech.degradation {
            Some(m) => {
                let loss = m.loss(event);
                let r = realize.thin(e1, 1.0 - loss);
                let kept = realize.thin(e0, 1.0 - loss);
                (r, kept, n0 + (e0 - kept))
            }
            None => (e1, e0, n0),
        };
        screen[i] = ScreenCounts {
            retest_pos,
            retest_neg: e1 - retest_pos,
            never: n1,
            unknown: u1,
        };

        let (p, q) = match fractions {
            Some((f_event, f_nonevent)) => {
                let f = if event { f_event } else { f_nonevent };
                (realize.thin(pos, f), realize.thin(neg, f))
            }
            None => (pos, neg),
        };
        control[i] = ControlCounts {
            sampled_pos: p,
            sampled_neg: q,
            unsampled: (pos + neg) - (p + q),
            unknown: u0,
        };
    }
    Ok(ObservedTrial { screen, control })
}
