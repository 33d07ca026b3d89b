//! Command-line front end: analytic power, simulation sweeps, reproduction
//! of published tables, and analysis of observed trial tables.

pub mod analyze;
pub mod config;
pub mod error;
pub mod output;
pub mod reproduce;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ietrial_core::mechanisms::RetestFractions;
use ietrial_core::power::{required_total_n, Analysis};
use ietrial_core::simulator::{run_study, DEFAULT_ALPHA, DEFAULT_REPS};
use ietrial_core::{analyze_power, solve_rates, TrialScenario};

pub use config::RunConfigFile;
pub use error::{CliError, Result};
pub use output::{Cell, Format, Table};
pub use reproduce::{ReproOptions, ReproTarget};

/// Upper end of the sample-size search for `power --target-power`.
const MAX_TOTAL_N: u64 = 100_000_000;

#[derive(Debug, Parser)]
#[command(name = "ietrial", version, about = "Intended-effect screening trial power and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic power of the standard and ever-positive analyses.
    Power {
        /// Run config; only `scenario`, `sim.alpha` and `output` are read.
        /// Defaults to the worked example.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also solve for the total size reaching this power.
        #[arg(long)]
        target_power: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo study of every scenario-by-mechanism cell.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute a published table or figure beside its published values.
    Reproduce {
        target: ReproTarget,
        #[command(flatten)]
        common: Common,
    },
    /// Estimates and tests for an observed ever/never/unknown decomposition.
    Analyze {
        /// CSV with columns table,events_screen,nonevents_screen,events_control,nonevents_control.
        input: PathBuf,
        /// Screen-arm retest-positive fraction among events.
        #[arg(long, requires = "retest_nonevent")]
        retest_event: Option<f64>,
        /// Screen-arm retest-positive fraction among non-events.
        #[arg(long, requires = "retest_event")]
        retest_nonevent: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    /// Flags override the config file.
    fn merge_into(&self, cfg: &mut RunConfigFile) -> Result<()> {
        cfg.sim.seed = self.seed.or(cfg.sim.seed);
        cfg.sim.reps = self.reps.or(cfg.sim.reps);
        cfg.sim.alpha = self.alpha.or(cfg.sim.alpha);
        cfg.output.path = self.out.clone().or(cfg.output.path.take());
        cfg.output.format = self.format.or(cfg.output.format);
        check_sim(cfg.sim.reps, cfg.sim.alpha)
    }

    fn alpha(&self) -> Result<f64> {
        check_sim(self.reps, self.alpha)?;
        Ok(self.alpha.unwrap_or(DEFAULT_ALPHA))
    }
}

fn check_sim(reps: Option<u64>, alpha: Option<f64>) -> Result<()> {
    if reps == Some(0) {
        return Err(CliError::Config("reps must be at least 1".into()));
    }
    if let Some(a) = alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::Config(format!("alpha = {a} must lie in (0, 1)")));
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Power {
            config,
            target_power,
            common,
        } => {
            let mut cfg = match &config {
                Some(p) => RunConfigFile::load(p)?,
                None => RunConfigFile {
                    scenario: vec![TrialScenario::figure1()],
                    mechanisms: Vec::new(),
                    sim: Default::default(),
                    output: Default::default(),
                },
            };
            common.merge_into(&mut cfg)?;
            let table = cmd_power(&cfg, target_power)?;
            emit(&table, &cfg)
        }
        Command::Simulate { config, common } => {
            let mut cfg = RunConfigFile::load(&config)?;
            common.merge_into(&mut cfg)?;
            let table = cmd_simulate(&cfg)?;
            emit(&table, &cfg)
        }
        Command::Reproduce { target, common } => {
            let opts = ReproOptions {
                seed: common.seed.unwrap_or(DEFAULT_SEED),
                reps: common.reps.unwrap_or(DEFAULT_REPS),
                alpha: common.alpha()?,
            };
            let table = reproduce::reproduce(target, &opts)?;
            output::emit(&table, common.format.unwrap_or_default(), common.out.as_deref())
        }
        Command::Analyze {
            input,
            retest_event,
            retest_nonevent,
            common,
        } => {
            let alpha = common.alpha()?;
            let retest = match (retest_event, retest_nonevent) {
                (Some(e), Some(n)) => Some(RetestFractions::exact(e, n)),
                _ => None,
            };
            let table = cmd_analyze(&input, retest, alpha)?;
            output::emit(&table, common.format.unwrap_or_default(), common.out.as_deref())
        }
    }
}

/// Seed for `reproduce` when none is given.
pub const DEFAULT_SEED: u64 = 20_240_101;

fn emit(table: &Table, cfg: &RunConfigFile) -> Result<()> {
    output::emit(table, cfg.output.format.unwrap_or_default(), cfg.output.path.as_deref())
}

const SCENARIO_COLUMNS: [&str; 7] = ["total_n", "control_fraction", "p0", "rr", "p_m", "rr_neg", "rr_pos"];

fn scenario_cells(s: &TrialScenario) -> Vec<Cell> {
    vec![
        Cell::Int(s.total_n),
        Cell::Rate(s.control_fraction),
        Cell::Rate(s.p0),
        Cell::Rate(s.rr),
        Cell::Rate(s.p_m),
        Cell::Rate(s.rr_neg),
        Cell::Rate(s.rr_pos),
    ]
}

/// One row per scenario: noncentralities, powers, and the solved
/// conditional rates. With `target_power`, also the total size each
/// analysis needs.
pub fn cmd_power(cfg: &RunConfigFile, target_power: Option<f64>) -> Result<Table> {
    let alpha = cfg.sim.alpha.unwrap_or(DEFAULT_ALPHA);
    let mut columns: Vec<&str> = SCENARIO_COLUMNS.to_vec();
    columns.extend([
        "alpha",
        "p0_given_pos",
        "p0_given_neg",
        "p1_given_pos",
        "p1_given_neg",
        "z_standard",
        "z_pos",
        "z_ratio",
        "power_standard",
        "power_pos",
    ]);
    if target_power.is_some() {
        columns.extend(["target_power", "total_n_standard", "total_n_pos"]);
    }
    let mut table = Table::new(columns);
    for s in &cfg.scenario {
        let rates = solve_rates(s)?;
        let p = analyze_power(s, alpha)?;
        let mut row = scenario_cells(s);
        row.extend([
            Cell::Rate(alpha),
            Cell::Rate(rates.x),
            Cell::Rate(rates.y),
            Cell::Rate(rates.screen_pos(s)),
            Cell::Rate(rates.screen_neg(s)),
            Cell::Rate(p.z_standard),
            Cell::Rate(p.z_pos),
            Cell::Rate(p.z_ratio),
            Cell::Rate(p.power_standard),
            Cell::Rate(p.power_pos),
        ]);
        if let Some(target) = target_power {
            let standard = required_total_n(s, Analysis::Standard, target, alpha, MAX_TOTAL_N)?;
            let pos = required_total_n(s, Analysis::EverPositive, target, alpha, MAX_TOTAL_N)?;
            row.extend([Cell::Rate(target), Cell::Int(standard), Cell::Int(pos)]);
        }
        table.push(row);
    }
    Ok(table)
}

pub const SIMULATE_COLUMNS: [&str; 28] = [
    "total_n",
    "control_fraction",
    "p0",
    "rr",
    "p_m",
    "rr_neg",
    "rr_pos",
    "f_event",
    "f_nonevent",
    "loss_event",
    "loss_nonevent",
    "retest_correction",
    "nc_screen_event",
    "nc_screen_nonevent",
    "nc_control_event",
    "nc_control_nonevent",
    "compliance_correction",
    "mean_rr_pos",
    "mean_rr_neg",
    "mean_corrected_rr_pos",
    "mean_corrected_rr_neg",
    "power_standard",
    "power_rr_pos",
    "power_corrected_rr_pos",
    "alpha_rr_neg",
    "alpha_corrected_rr_neg",
    "degenerate_reps",
    "seed",
];

/// One row per scenario-by-mechanism cell.
pub fn cmd_simulate(cfg: &RunConfigFile) -> Result<Table> {
    let mut table = Table::new(SIMULATE_COLUMNS);
    for (m, sim) in cfg.sim_configs() {
        sim.validate()?;
        let r = run_study(&sim)?;
        let mut row = scenario_cells(&sim.scenario);
        let opt = |v: Option<f64>| Cell::rate(v);
        row.extend([
            opt(m.sampling.map(|s| s.f_event)),
            opt(m.sampling.map(|s| s.f_nonevent)),
            opt(m.degradation.map(|d| d.loss_event)),
            opt(m.degradation.map(|d| d.loss_nonevent)),
            Cell::Bool(sim.retest_correction),
            opt(m.noncompliance.map(|n| n.screen_event)),
            opt(m.noncompliance.map(|n| n.screen_nonevent)),
            opt(m.noncompliance.map(|n| n.control_event)),
            opt(m.noncompliance.map(|n| n.control_nonevent)),
            Cell::Bool(sim.compliance_correction),
            Cell::Rate(r.mean_rr_pos),
            Cell::Rate(r.mean_rr_neg),
            opt(r.mean_corrected_rr_pos),
            opt(r.mean_corrected_rr_neg),
            Cell::Rate(r.power_standard),
            Cell::Rate(r.power_rr_pos),
            opt(r.power_corrected_rr_pos),
            Cell::Rate(r.alpha_rr_neg),
            opt(r.alpha_corrected_rr_neg),
            Cell::Int(r.degenerate_reps),
            Cell::Int(r.seed),
        ]);
        table.push(row);
    }
    Ok(table)
}

pub fn cmd_analyze(input: &Path, retest: Option<RetestFractions>, alpha: f64) -> Result<Table> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let d = analyze::parse_decomposition(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", input.display())),
        other => other,
    })?;
    analyze::analyze(&d, retest, alpha)
}
