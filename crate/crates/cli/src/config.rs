//! Run configuration file.
//!
//! ```json
//! {
//!   "scenario": { "total_n": 100000, "control_fraction": 0.5, "p0": 0.02,
//!                 "rr": 0.9, "p_m": 0.05, "rr_neg": 1.0, "rr_pos": 0.8667 },
//!   "mechanisms": {
//!     "sampling": { "f_event": 0.95, "f_nonevent": 0.5 },
//!     "degradation": { "loss_event": 0.1, "loss_nonevent": 0.2, "retest_correction": true }
//!   },
//!   "sim": { "reps": 10000, "seed": 7, "alpha": 0.05 },
//!   "output": { "path": "out.csv", "format": "csv" }
//! }
//! ```
//!
//! `scenario` and `mechanisms` may also be arrays; a simulation then runs
//! every scenario against every mechanism set.

use std::path::{Path, PathBuf};

use ietrial_core::mechanisms::{DegradationModel, Mechanisms, NonComplianceModel, SamplingPlan};
use ietrial_core::simulator::{SimConfig, DEFAULT_ALPHA, DEFAULT_REPS};
use ietrial_core::TrialScenario;
use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer};

use crate::error::{CliError, Result};
use crate::output::Format;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(deserialize_with = "one_or_many")]
    pub scenario: Vec<TrialScenario>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub mechanisms: Vec<MechanismConfig>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub sampling: Option<SamplingConfig>,
    pub degradation: Option<DegradationConfig>,
    pub noncompliance: Option<NonComplianceConfig>,
}

/// Testing fractions for control-arm stored specimens by outcome.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub f_event: f64,
    pub f_nonevent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationConfig {
    pub loss_event: f64,
    pub loss_nonevent: f64,
    #[serde(default)]
    pub retest_correction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonComplianceConfig {
    pub screen_event: f64,
    pub screen_nonevent: f64,
    pub control_event: f64,
    pub control_nonevent: f64,
    #[serde(default)]
    pub correction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: DeserializeOwned,
{
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::Array(items) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| serde_json::from_value(v).map_err(|e| D::Error::custom(format!("element {i}: {e}"))))
            .collect(),
        v => serde_json::from_value(v).map(|x| vec![x]).map_err(D::Error::custom),
    }
}

impl MechanismConfig {
    pub fn mechanisms(&self) -> Mechanisms {
        Mechanisms {
            sampling: self.sampling.map(|s| SamplingPlan::two_phase(s.f_event, s.f_nonevent)),
            degradation: self.degradation.map(|d| DegradationModel::new(d.loss_event, d.loss_nonevent)),
            noncompliance: self.noncompliance.map(|n| {
                NonComplianceModel::by_arm_and_outcome(
                    n.screen_event,
                    n.screen_nonevent,
                    n.control_event,
                    n.control_nonevent,
                )
            }),
        }
    }

    pub fn retest_correction(&self) -> bool {
        self.degradation.is_some_and(|d| d.retest_correction)
    }

    pub fn compliance_correction(&self) -> bool {
        self.noncompliance.is_some_and(|n| n.correction)
    }
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.scenario.is_empty() {
            return Err(CliError::Config("`scenario` must not be empty".into()));
        }
        if cfg.mechanisms.is_empty() {
            cfg.mechanisms.push(MechanismConfig::default());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Range checks only; feasibility is left to the commands.
    fn validate(&self) -> Result<()> {
        let tag = |what: String, e: ietrial_core::Error| CliError::Config(format!("{what}: {e}"));
        for (i, s) in self.scenario.iter().enumerate() {
            s.validate().map_err(|e| tag(format!("scenario {i}"), e))?;
        }
        for (i, m) in self.mechanisms.iter().enumerate() {
            m.mechanisms().validate().map_err(|e| tag(format!("mechanisms {i}"), e))?;
        }
        if let Some(a) = self.sim.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::Config(format!("sim.alpha = {a} must lie in (0, 1)")));
            }
        }
        if self.sim.reps == Some(0) {
            return Err(CliError::Config("sim.reps must be at least 1".into()));
        }
        Ok(())
    }

    /// One simulation config per scenario-by-mechanism cell, scenario-major.
    pub fn sim_configs(&self) -> Vec<(MechanismConfig, SimConfig)> {
        let mut out = Vec::new();
        for s in &self.scenario {
            for m in &self.mechanisms {
                let cfg = SimConfig {
                    mechanisms: m.mechanisms(),
                    retest_correction: m.retest_correction(),
                    compliance_correction: m.compliance_correction(),
                    reps: self.sim.reps.unwrap_or(DEFAULT_REPS),
                    seed: self.sim.seed.unwrap_or(0),
                    alpha: self.sim.alpha.unwrap_or(DEFAULT_ALPHA),
                    ..SimConfig::new(*s)
                };
                out.push((*m, cfg));
            }
        }
        out
    }
}
