//! Intended-effect analysis of screening trials: trial tables, scenario
//! solving, analytic power, measurement mechanisms, and Monte Carlo
//! simulation.

pub mod designs;
pub mod error;
pub mod mechanisms;
pub mod normal;
pub mod power;
pub mod random;
pub mod scenario;
pub mod simulator;
pub mod tables;

pub use error::{Arm, Error, Result};
pub use power::{analyze_power, noncentrality, power_curve, power_from_z, z_ratio, PowerResult};
pub use scenario::{expected_decomposition, pooled_everpos_rate, solve_rates, ConditionalRates, TrialScenario};
pub use tables::{Estimand, EstimateResult, TrialDecomposition, TwoByTwoTable};
