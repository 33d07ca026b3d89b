//! Reproduction targets: recompute each published table or figure and set
//! the result beside the published numbers.

use ietrial_core::designs;
use ietrial_core::mechanisms::{apply_noncompliance, compliance_ratio_correct, compliance_ratios, NonComplianceModel, Realize};
use ietrial_core::simulator::{run_study, SimConfig, SimSummary};
use ietrial_core::tables::{pooled_z_test, relative_risk};
use ietrial_core::{analyze_power, expected_decomposition, power_curve, TrialDecomposition, TrialScenario, TwoByTwoTable};

use crate::error::{CliError, Result};
use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum ReproTarget {
    #[value(name = "fig1")]
    Fig1,
    #[value(name = "fig2")]
    Fig2,
    #[value(name = "figS1")]
    FigS1,
    #[value(name = "figS2")]
    FigS2,
    #[value(name = "figS3")]
    FigS3,
    #[value(name = "table1a")]
    Table1a,
    #[value(name = "table1b")]
    Table1b,
    #[value(name = "table2a")]
    Table2a,
    #[value(name = "table2b")]
    Table2b,
    #[value(name = "table2c")]
    Table2c,
    #[value(name = "table3")]
    Table3,
}

impl ReproTarget {
    pub const ALL: [ReproTarget; 11] = [
        Self::Fig1,
        Self::Fig2,
        Self::FigS1,
        Self::FigS2,
        Self::FigS3,
        Self::Table1a,
        Self::Table1b,
        Self::Table2a,
        Self::Table2b,
        Self::Table2c,
        Self::Table3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::FigS1 => "figS1",
            Self::FigS2 => "figS2",
            Self::FigS3 => "figS3",
            Self::Table1a => "table1a",
            Self::Table1b => "table1b",
            Self::Table2a => "table2a",
            Self::Table2b => "table2b",
            Self::Table2c => "table2c",
            Self::Table3 => "table3",
        }
    }

    fn published_csv(self) -> &'static str {
        match self {
            Self::Fig1 => include_str!("../data/fig1.csv"),
            Self::Fig2 => include_str!("../data/fig2.csv"),
            Self::FigS1 => include_str!("../data/figS1.csv"),
            Self::FigS2 => include_str!("../data/figS2.csv"),
            Self::FigS3 => include_str!("../data/figS3.csv"),
            Self::Table1a => include_str!("../data/table1a.csv"),
            Self::Table1b => include_str!("../data/table1b.csv"),
            Self::Table2a => include_str!("../data/table2a.csv"),
            Self::Table2b => include_str!("../data/table2b.csv"),
            Self::Table2c => include_str!("../data/table2c.csv"),
            Self::Table3 => include_str!("../data/table3.csv"),
        }
    }

    /// True when the target runs Monte Carlo replicates.
    pub fn simulated(self) -> bool {
        matches!(
            self,
            Self::Table1a | Self::Table1b | Self::Table2a | Self::Table2b | Self::Table2c | Self::Table3
        )
    }

    pub fn published(self) -> Result<Vec<Published>> {
        parse_published(self.published_csv())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    /// `max(0.02, 3·sqrt(p(1−p)/reps))` around the published rate `p`.
    MonteCarlo,
}

impl Tolerance {
    pub fn resolve(self, published: f64, reps: u64) -> f64 {
        match self {
            Tolerance::Absolute(t) => t,
            Tolerance::MonteCarlo => {
                let p = published.clamp(0.0, 1.0);
                MC_FLOOR.max(3.0 * (p * (1.0 - p) / reps as f64).sqrt())
            }
        }
    }
}

const MC_FLOOR: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Published {
    pub setting: String,
    pub quantity: String,
    /// As printed.
    pub text: String,
    pub value: f64,
    pub tolerance: Tolerance,
}

fn parse_published(text: &str) -> Result<Vec<Published>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| CliError::Input(format!("published data: {e}")))?;
        let field = |i: usize| r.get(i).unwrap_or("").to_string();
        let text = field(2);
        let value = text
            .parse()
            .map_err(|_| CliError::Input(format!("published data: bad value `{text}`")))?;
        let tolerance = match field(3).as_str() {
            "mc" => Tolerance::MonteCarlo,
            t => Tolerance::Absolute(
                t.parse()
                    .map_err(|_| CliError::Input(format!("published data: bad tolerance `{t}`")))?,
            ),
        };
        out.push(Published {
            setting: field(0),
            quantity: field(1),
            text,
            value,
            tolerance,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproOptions {
    pub seed: u64,
    pub reps: u64,
    pub alpha: f64,
}

/// One recomputed quantity. `None` marks an undefined value, such as an
/// infeasible grid point.
#[derive(Debug, Clone, PartialEq)]
struct Measured {
    setting: String,
    quantity: &'static str,
    value: Option<f64>,
    count: bool,
}

#[derive(Default)]
struct Sink(Vec<Measured>);

impl Sink {
    fn rate(&mut self, setting: &str, quantity: &'static str, value: impl Into<Option<f64>>) {
        self.0.push(Measured {
            setting: setting.to_string(),
            quantity,
            value: value.into(),
            count: false,
        });
    }

    fn count(&mut self, setting: &str, quantity: &'static str, value: f64) {
        self.0.push(Measured {
            setting: setting.to_string(),
            quantity,
            value: Some(value),
            count: true,
        });
    }

    fn cells(&mut self, setting: &str, prefix: &str, t: &TwoByTwoTable) {
        let names: [&'static str; 4] = match prefix {
            "" => ["events_screen", "nonevents_screen", "events_control", "nonevents_control"],
            "ever_" => [
                "ever_events_screen",
                "ever_nonevents_screen",
                "ever_events_control",
                "ever_nonevents_control",
            ],
            "unknown_" => [
                "unknown_events_screen",
                "unknown_nonevents_screen",
                "unknown_events_control",
                "unknown_nonevents_control",
            ],
            _ => unreachable!("cell prefix {prefix}"),
        };
        for (name, v) in names.into_iter().zip(t.cells()) {
            self.count(setting, name, v);
        }
    }
}

pub const COLUMNS: [&str; 7] = ["target", "setting", "quantity", "reproduced", "published", "tolerance", "pass"];

pub fn reproduce(target: ReproTarget, opts: &ReproOptions) -> Result<Table> {
    if opts.reps == 0 {
        return Err(CliError::Config("reps must be at least 1".into()));
    }
    let mut sink = Sink::default();
    match target {
        ReproTarget::Fig1 => fig1(&mut sink, opts)?,
        ReproTarget::Fig2 => fig2(&mut sink, opts)?,
        ReproTarget::FigS1 => fig_s1(&mut sink, opts)?,
        ReproTarget::FigS2 => noncompliance_figure(&mut sink, NonComplianceModel::by_arm(0.2, 0.3))?,
        ReproTarget::FigS3 => {
            noncompliance_figure(&mut sink, NonComplianceModel::by_arm_and_outcome(0.4, 0.8, 0.8, 0.4))?
        }
        ReproTarget::Table1a => table1(&mut sink, 1.0, opts)?,
        ReproTarget::Table1b => table1(&mut sink, 0.8, opts)?,
        ReproTarget::Table2a => table2(&mut sink, Table2::NonDifferential, opts)?,
        ReproTarget::Table2b => table2(&mut sink, Table2::Differential, opts)?,
        ReproTarget::Table2c => table2(&mut sink, Table2::Corrected, opts)?,
        ReproTarget::Table3 => table3(&mut sink, opts)?,
    }
    merge(target, sink.0, opts.reps)
}

fn merge(target: ReproTarget, measured: Vec<Measured>, reps: u64) -> Result<Table> {
    let published = target.published()?;
    let mut used = vec![false; published.len()];
    let mut table = Table::new(COLUMNS);
    for m in measured {
        let hit = published
            .iter()
            .position(|p| p.setting == m.setting && p.quantity == m.quantity);
        let reproduced = match (m.value, m.count) {
            (None, _) => Cell::Empty,
            (Some(v), true) => Cell::Count(v),
            (Some(v), false) => Cell::Rate(v),
        };
        let (published_cell, tol_cell, pass) = match hit {
            Some(i) => {
                used[i] = true;
                let p = &published[i];
                let tol = p.tolerance.resolve(p.value, reps);
                let ok = m.value.is_some_and(|v| (v - p.value).abs() <= tol + 1e-12 * p.value.abs());
                (
                    Cell::Verbatim(p.text.clone(), p.value),
                    Cell::Exact(tol),
                    Cell::Text(if ok { "PASS" } else { "FAIL" }.into()),
                )
            }
            None => (Cell::Empty, Cell::Empty, Cell::Empty),
        };
        table.push(vec![
            Cell::Text(target.name().into()),
            Cell::Text(m.setting),
            Cell::Text(m.quantity.into()),
            reproduced,
            published_cell,
            tol_cell,
            pass,
        ]);
    }
    if let Some(i) = used.iter().position(|u| !u) {
        let p = &published[i];
        return Err(CliError::Input(format!(
            "{}: published value `{}`/`{}` has no reproduced counterpart",
            target.name(),
            p.setting,
            p.quantity
        )));
    }
    Ok(table)
}

fn fig1(sink: &mut Sink, opts: &ReproOptions) -> Result<()> {
    let s = designs::worked_example();
    let d = expected_decomposition(&s)?;
    let power = analyze_power(&s, opts.alpha)?;
    for (name, t, pw) in [
        ("standard", d.overall(), Some(power.power_standard)),
        ("never", d.never, None),
        ("ever", d.ever, Some(power.power_pos)),
    ] {
        sink.cells(name, "", &t);
        let test = pooled_z_test(&t)?;
        sink.rate(name, "rr", relative_risk(&t)?);
        sink.rate(name, "rd", test.point);
        sink.rate(name, "z", test.z);
        sink.rate(name, "p_two_sided", test.p_two_sided);
        if let Some(p) = pw {
            sink.rate(name, "power", p);
        }
    }
    sink.rate("ever", "z_ratio", power.z_ratio);
    Ok(())
}

fn fig2(sink: &mut Sink, opts: &ReproOptions) -> Result<()> {
    let base = designs::power_curve_base();
    sink.rate("standard", "power_standard", analyze_power(&base, opts.alpha)?.power_standard);
    let curve = power_curve(
        &base,
        &designs::POWER_CURVE_RR_POS,
        &designs::POWER_CURVE_P_M,
        &designs::POWER_CURVE_RR_NEG,
        opts.alpha,
    );
    for p in curve {
        let setting = format!("rr_neg={} p_m={} rr_pos={}", p.rr_neg, p.p_m, p.rr_pos);
        sink.rate(&setting, "power_pos", p.power_pos);
    }
    Ok(())
}

fn fig_s1(sink: &mut Sink, opts: &ReproOptions) -> Result<()> {
    for s in designs::low_positivity_pair() {
        let setting = format!("rr_pos={}", s.rr_pos);
        let d = expected_decomposition(&s)?;
        sink.count(&setting, "ever_events", d.ever.total_events());
        let power = analyze_power(&s, opts.alpha)?;
        sink.rate(&setting, "power_pos", power.power_pos);
        sink.rate(&setting, "power_standard", power.power_standard);
    }
    Ok(())
}

fn positivity(sink: &mut Sink, setting: &str, s: &TrialScenario, d: &TrialDecomposition) {
    sink.rate(setting, "screen_positivity_pct", 100.0 * d.ever.screen_total() / s.n_screen() as f64);
    sink.rate(setting, "control_positivity_pct", 100.0 * d.ever.control_total() / s.n_control() as f64);
}

fn noncompliance_figure(sink: &mut Sink, model: NonComplianceModel) -> Result<()> {
    let s = designs::worked_example();
    let truth = expected_decomposition(&s)?;
    let observed = apply_noncompliance(&truth, &model, &mut Realize::Expected)?;
    let corrected = compliance_ratio_correct(&observed)?;
    let (c_event, c_nonevent) = compliance_ratios(&observed)?;
    let rr = relative_risk;

    sink.cells("observed", "ever_", &observed.ever);
    sink.cells("observed", "unknown_", &observed.unknown);
    positivity(sink, "observed", &s, &observed);
    sink.rate("observed", "rr_pos", rr(&observed.ever)?);
    sink.rate("observed", "rr_neg", rr(&observed.never)?);
    sink.rate("ratio", "compliance_ratio_event", c_event);
    sink.rate("ratio", "compliance_ratio_nonevent", c_nonevent);
    sink.cells("corrected", "ever_", &corrected.ever);
    positivity(sink, "corrected", &s, &corrected);
    sink.rate("corrected", "rr_pos", rr(&corrected.ever)?);
    sink.rate("corrected", "rr_neg", rr(&corrected.never)?);
    sink.rate("perfect", "rr_pos", rr(&truth.ever)?);
    Ok(())
}

fn study(cfg: SimConfig, opts: &ReproOptions) -> Result<SimSummary> {
    let cfg = SimConfig {
        seed: opts.seed,
        reps: opts.reps,
        alpha: opts.alpha,
        ..cfg
    };
    Ok(run_study(&cfg)?)
}

fn table1(sink: &mut Sink, f_event: f64, opts: &ReproOptions) -> Result<()> {
    let columns = designs::subsampling_columns();
    let labels = ["n=100000 rr_pos=0.867", "n=75000 rr_pos=0.8", "n=50000 rr_pos=0.7"];
    for f in designs::NONEVENT_FRACTIONS {
        for (s, label) in columns.iter().zip(labels) {
            let summary = study(designs::subsampling(*s, f_event, f), opts)?;
            let setting = format!("{label} f_event={f_event} f_nonevent={f}");
            sink.rate(&setting, "power_rr_pos", summary.power_rr_pos);
            sink.rate(&setting, "mean_rr_pos", summary.mean_rr_pos);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Table2 {
    NonDifferential,
    Differential,
    Corrected,
}

fn table2(sink: &mut Sink, which: Table2, opts: &ReproOptions) -> Result<()> {
    let grid: Vec<(f64, f64)> = match which {
        Table2::NonDifferential => designs::NONDIFFERENTIAL_LOSS.iter().map(|&l| (l, l)).collect(),
        _ => designs::DIFFERENTIAL_LOSS.to_vec(),
    };
    let corrected = which == Table2::Corrected;
    for (le, ln) in grid {
        let s = study(designs::loss_of_signal(le, ln, corrected), opts)?;
        let setting = format!("loss_event={le} loss_nonevent={ln}");
        if corrected {
            sink.rate(&setting, "mean_corrected_rr_pos", s.mean_corrected_rr_pos);
            sink.rate(&setting, "mean_corrected_rr_neg", s.mean_corrected_rr_neg);
            sink.rate(&setting, "power_corrected_rr_pos", s.power_corrected_rr_pos);
            sink.rate(&setting, "alpha_corrected_rr_neg", s.alpha_corrected_rr_neg);
        } else {
            sink.rate(&setting, "mean_rr_pos", s.mean_rr_pos);
            sink.rate(&setting, "mean_rr_neg", s.mean_rr_neg);
            sink.rate(&setting, "power_rr_pos", s.power_rr_pos);
            sink.rate(&setting, "alpha_rr_neg", s.alpha_rr_neg);
        }
        sink.count(&setting, "degenerate_reps", s.degenerate_reps as f64);
    }
    Ok(())
}

fn table3(sink: &mut Sink, opts: &ReproOptions) -> Result<()> {
    let truth = expected_decomposition(&designs::worked_example())?;
    for (label, model) in designs::noncompliance_patterns() {
        let thinned = apply_noncompliance(&truth, &model, &mut Realize::Expected)?;
        let known = thinned.ever.add(&thinned.never);
        sink.rate(label, "control_positivity_pct", 100.0 * thinned.ever.control_total() / known.control_total());
        sink.rate(label, "screen_positivity_pct", 100.0 * thinned.ever.screen_total() / known.screen_total());
        let s = study(designs::noncompliance(model), opts)?;
        sink.rate(label, "mean_rr_pos", s.mean_rr_pos);
        sink.rate(label, "mean_rr_neg", s.mean_rr_neg);
        sink.rate(label, "mean_corrected_rr_pos", s.mean_corrected_rr_pos);
        sink.rate(label, "mean_corrected_rr_neg", s.mean_corrected_rr_neg);
        sink.rate(label, "power_rr_pos", s.power_rr_pos);
        sink.rate(label, "power_corrected_rr_pos", s.power_corrected_rr_pos);
        sink.rate(label, "alpha_corrected_rr_neg", s.alpha_corrected_rr_neg);
        sink.count(label, "degenerate_reps", s.degenerate_reps as f64);
    }
    Ok(())
}
