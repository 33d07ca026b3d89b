//! Seeded Monte Carlo replicates of a trial with mechanism layers, and the
//! power, type-1 error, and mean-estimate summaries over them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::mechanisms::{observe, Corrections, Mechanisms, ObservedTrial, Realize, Stratum};
use crate::power::power_from_z;
use crate::random::binomial;
pub use crate::random::rng_stream;
use crate::scenario::{expected_decomposition, solve_rates, TrialScenario};
use crate::tables::{pooled_z_test, TrialDecomposition, TwoByTwoTable};

pub const DEFAULT_REPS: u64 = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: TrialScenario,
    pub mechanisms: Mechanisms,
    /// Correct the control arm with screen-arm retest fractions.
    pub retest_correction: bool,
    /// Correct the control arm with per-outcome compliance ratios.
    pub compliance_correction: bool,
    pub reps: u64,
    pub seed: u64,
    pub alpha: f64,
    /// Thread count; `None` uses the global pool. Results do not depend on it.
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn new(scenario: TrialScenario) -> Self {
        Self {
            scenario,
            mechanisms: Mechanisms::default(),
            retest_correction: false,
            compliance_correction: false,
            reps: DEFAULT_REPS,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            workers: None,
        }
    }

    pub fn corrections(&self) -> Corrections {
        Corrections {
            retest: self.retest_correction,
            compliance: self.compliance_correction,
        }
    }

    pub fn corrected(&self) -> bool {
        self.retest_correction || self.compliance_correction
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        check_open_unit("alpha", self.alpha)?;
        self.mechanisms.validate()?;
        if self.retest_correction && self.mechanisms.degradation.is_none() {
            return Err(Error::InvalidConfig(
                "retest correction needs a degradation model".into(),
            ));
        }
        solve_rates(&self.scenario).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub reps: u64,
    pub seed: u64,
    pub mean_rr_pos: f64,
    pub mean_rr_neg: f64,
    pub mean_corrected_rr_pos: Option<f64>,
    pub mean_corrected_rr_neg: Option<f64>,
    pub power_standard: f64,
    pub power_rr_pos: f64,
    pub power_corrected_rr_pos: Option<f64>,
    /// Rejection rate of the RR_neg = 1 test.
    pub alpha_rr_neg: f64,
    pub alpha_corrected_rr_neg: Option<f64>,
    /// Replicates where some estimate was undefined. They count as
    /// non-rejections and are left out of the means.
    pub degenerate_reps: u64,
    /// Monte Carlo standard error of `power_rr_pos`.
    pub monte_carlo_se_power: f64,
}

/// Draw one trial: ever-positives per arm, then events in each of the four
/// arm-by-positivity cells.
pub fn simulate_decomposition<R: Rng + ?Sized>(
    s: &TrialScenario,
    rng: &mut R,
) -> Result<TrialDecomposition> {
    let rates = solve_rates(s)?;
    let n1 = s.n_screen();
    let n0 = s.n_control();
    let m1 = binomial(rng, n1, s.p_m);
    let m0 = binomial(rng, n0, s.p_m);
    let a = binomial(rng, m1, rates.screen_pos(s));
    let b = binomial(rng, n1 - m1, rates.screen_neg(s));
    let c = binomial(rng, m0, rates.x);
    let d = binomial(rng, n0 - m0, rates.y);
    let f = |v: u64| v as f64;
    Ok(TrialDecomposition::new(
        TwoByTwoTable::new(f(a), f(m1 - a), f(c), f(m0 - c)),
        TwoByTwoTable::new(f(b), f(n1 - m1 - b), f(d), f(n0 - m0 - d)),
        TwoByTwoTable::ZERO,
    ))
}

#[derive(Debug, Clone, Copy)]
struct Estimate {
    rr: f64,
    reject: bool,
}

#[derive(Debug, Clone, Copy)]
struct Replicate {
    reject_standard: bool,
    pos: Option<Estimate>,
    neg: Option<Estimate>,
    corrected_pos: Option<Estimate>,
    corrected_neg: Option<Estimate>,
}

fn test(obs: &ObservedTrial, stratum: Stratum, c: Corrections, alpha: f64) -> Option<Estimate> {
    let r = obs.test(stratum, c).ok()?;
    r.point.is_finite().then_some(Estimate {
        rr: r.point,
        reject: r.p_two_sided < alpha,
    })
}

fn replicate(cfg: &SimConfig, index: u64) -> Result<Replicate> {
    let mut rng = rng_stream(cfg.seed, index);
    let truth = simulate_decomposition(&cfg.scenario, &mut rng)?;
    let obs = observe(&truth, &cfg.mechanisms, &mut Realize::Sample(&mut rng))?;
    let reject_standard = pooled_z_test(&truth.overall())
        .map(|r| r.p_two_sided < cfg.alpha)
        .unwrap_or(false);
    let none = Corrections::NONE;
    let (corrected_pos, corrected_neg) = if cfg.corrected() {
        let c = cfg.corrections();
        (
            test(&obs, Stratum::Ever, c, cfg.alpha),
            test(&obs, Stratum::Never, c, cfg.alpha),
        )
    } else {
        (None, None)
    };
    Ok(Replicate {
        reject_standard,
        pos: test(&obs, Stratum::Ever, none, cfg.alpha),
        neg: test(&obs, Stratum::Never, none, cfg.alpha),
        corrected_pos,
        corrected_neg,
    })
}

#[derive(Default)]
struct Tally {
    sum: f64,
    defined: u64,
    rejections: u64,
}

impl Tally {
    fn push(&mut self, e: Option<Estimate>) {
        if let Some(e) = e {
            self.sum += e.rr;
            self.defined += 1;
            self.rejections += e.reject as u64;
        }
    }

    fn mean(&self) -> f64 {
        if self.defined == 0 {
            f64::NAN
        } else {
            self.sum / self.defined as f64
        }
    }

    fn rate(&self, reps: u64) -> f64 {
        self.rejections as f64 / reps as f64
    }
}

/// Run `cfg.reps` replicates and summarize. Replicate `i` always uses
/// stream `(seed, i)` and aggregation runs in index order, so the summary
/// is the same for any worker count.
pub fn run_study(cfg: &SimConfig) -> Result<SimSummary> {
    cfg.validate()?;
    let run = || -> Result<Vec<Replicate>> {
        (0..cfg.reps)
            .into_par_iter()
            .map(|i| replicate(cfg, i))
            .collect()
    };
    let reps = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let mut standard = 0u64;
    let (mut pos, mut neg, mut cpos, mut cneg) =
        (Tally::default(), Tally::default(), Tally::default(), Tally::default());
    let mut degenerate = 0u64;
    for r in &reps {
        standard += r.reject_standard as u64;
        pos.push(r.pos);
        neg.push(r.neg);
        cpos.push(r.corrected_pos);
        cneg.push(r.corrected_neg);
        let missing = r.pos.is_none()
            || r.neg.is_none()
            || (cfg.corrected() && (r.corrected_pos.is_none() || r.corrected_neg.is_none()));
        degenerate += missing as u64;
    }
    let n = cfg.reps;
    let corrected = |v: f64| cfg.corrected().then_some(v);
    let power_rr_pos = pos.rate(n);
    Ok(SimSummary {
        reps: n,
        seed: cfg.seed,
        mean_rr_pos: pos.mean(),
        mean_rr_neg: neg.mean(),
        mean_corrected_rr_pos: corrected(cpos.mean()),
        mean_corrected_rr_neg: corrected(cneg.mean()),
        power_standard: standard as f64 / n as f64,
        power_rr_pos,
        power_corrected_rr_pos: corrected(cpos.rate(n)),
        alpha_rr_neg: neg.rate(n),
        alpha_corrected_rr_neg: corrected(cneg.rate(n)),
        degenerate_reps: degenerate,
        monte_carlo_se_power: (power_rr_pos * (1.0 - power_rr_pos) / n as f64).sqrt(),
    })
}

/// Which RR_neg test a type-1 error run scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullTest {
    RrNeg,
    CorrectedRrNeg,
}

/// Rejection rate of an RR_neg test under a scenario with RR_neg = 1.
pub fn estimate_type1_error(cfg: &SimConfig, which: NullTest) -> Result<f64> {
    if cfg.scenario.rr_neg != 1.0 {
        return Err(Error::InvalidParameter {
            name: "rr_neg",
            value: cfg.scenario.rr_neg,
            reason: "type-1 error needs a null never-positive effect (rr_neg = 1)",
        });
    }
    let s = run_study(cfg)?;
    match which {
        NullTest::RrNeg => Ok(s.alpha_rr_neg),
        NullTest::CorrectedRrNeg => s.alpha_corrected_rr_neg.ok_or_else(|| {
            Error::InvalidConfig("corrected RR_neg needs a correction enabled".into())
        }),
    }
}

/// Estimates and approximate power from expected (not sampled) counts under
/// the same mechanisms and tests as [`run_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedAnalysis {
    pub rr_pos: f64,
    pub rr_neg: f64,
    pub power_standard: f64,
    pub power_rr_pos: f64,
    pub corrected_rr_pos: Option<f64>,
    pub corrected_rr_neg: Option<f64>,
    pub power_corrected_rr_pos: Option<f64>,
}

pub fn expected_analysis(cfg: &SimConfig) -> Result<ExpectedAnalysis> {
    cfg.validate()?;
    let truth = expected_decomposition(&cfg.scenario)?;
    let obs = observe(&truth, &cfg.mechanisms, &mut Realize::Expected)?;
    let standard = pooled_z_test(&truth.overall())?;
    let pos = obs.test(Stratum::Ever, Corrections::NONE)?;
    let neg = obs.test(Stratum::Never, Corrections::NONE)?;
    let (cpos, cneg) = if cfg.corrected() {
        (
            Some(obs.test(Stratum::Ever, cfg.corrections())?),
            Some(obs.test(Stratum::Never, cfg.corrections())?),
        )
    } else {
        (None, None)
    };
    let power = |z: f64| power_from_z(z.abs(), cfg.alpha);
    Ok(ExpectedAnalysis {
        rr_pos: pos.point,
        rr_neg: neg.point,
        power_standard: power(standard.z),
        power_rr_pos: power(pos.z),
        corrected_rr_pos: cpos.map(|r| r.point),
        corrected_rr_neg: cneg.map(|r| r.point),
        power_corrected_rr_pos: cpos.map(|r| power(r.z)),
    })
}
