use thiserror::Error;

/// Trial arm. The screen arm is arm 1, the control arm is arm 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Screen,
    Control,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arm::Screen => f.write_str("screen"),
            Arm::Control => f.write_str("control"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{arm} arm has no participants")]
    EmptyArm { arm: Arm },

    #[error("relative risk undefined: control arm has no events")]
    UndefinedRelativeRisk,

    #[error("degenerate table: pooled event rate {pooled} is not strictly inside (0, 1)")]
    DegenerateTable { pooled: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("infeasible scenario: P0(D+|M+) = {x}, P0(D+|M-) = {y}; both must lie in [0, 1]")]
    InfeasibleScenario { x: f64, y: f64 },

    #[error("infeasible scenario: screen-arm rates P1(D+|M+) = {pos}, P1(D+|M-) = {neg} fall outside [0, 1]")]
    InfeasibleScreenRates { pos: f64, neg: f64 },

    #[error("rr_neg equals rr_pos ({0}); the pooled ever-positive identity is undefined, use the expected decomposition instead")]
    EqualStratumEffects(f64),

    #[error("risk difference is zero (rr = 1); the noncentrality ratio is undefined")]
    ZeroRiskDifference,

    #[error("correction unavailable: {0}")]
    CorrectionUnavailable(&'static str),

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be a probability in [0, 1]",
        })
    }
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie strictly inside (0, 1)",
        })
    }
}
