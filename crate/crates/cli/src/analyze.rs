//! Estimates and tests on user-supplied ever/never/unknown tables.

use ietrial_core::mechanisms::{Corrections, ObservedTrial, RetestFractions, Stratum};
use ietrial_core::tables::{estimate, risk_difference};
use ietrial_core::{Estimand, EstimateResult, TrialDecomposition, TwoByTwoTable};

use crate::error::{CliError, Result};
use crate::output::{Cell, Table};

pub const COLUMNS: [&str; 5] = [
    "table",
    "events_screen",
    "nonevents_screen",
    "events_control",
    "nonevents_control",
];

/// Parse a decomposition CSV. The `ever` and `never` rows are required,
/// `unknown` defaults to zeros. Errors name the line and column.
pub fn parse_decomposition(text: &str) -> Result<TrialDecomposition> {
    let bad = |msg: String| CliError::Input(msg);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(format!("header: {e}")))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != COLUMNS {
        return Err(bad(format!(
            "line 1: header must be `{}`, found `{}`",
            COLUMNS.join(","),
            found.join(",")
        )));
    }

    let mut tables: [Option<TwoByTwoTable>; 3] = [None; 3];
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let name = record.get(0).unwrap_or("");
        let slot = match name {
            "ever" => 0,
            "never" => 1,
            "unknown" => 2,
            other => {
                return Err(bad(format!(
                    "line {line}, column table: `{other}` is not one of ever, never, unknown"
                )))
            }
        };
        if tables[slot].is_some() {
            return Err(bad(format!("line {line}, column table: duplicate `{name}` row")));
        }
        let mut cells = [0.0; 4];
        for (j, cell) in cells.iter_mut().enumerate() {
            let column = COLUMNS[j + 1];
            let raw = record.get(j + 1).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(format!("line {line}, column {column}: `{raw}` is not a number")))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(format!(
                    "line {line}, column {column}: count {raw} must be finite and non-negative"
                )));
            }
            *cell = v;
        }
        tables[slot] = Some(TwoByTwoTable::new(cells[0], cells[1], cells[2], cells[3]));
    }
    let [ever, never, unknown] = tables;
    let missing = |n: &str| bad(format!("missing `{n}` row"));
    Ok(TrialDecomposition::new(
        ever.ok_or_else(|| missing("ever"))?,
        never.ok_or_else(|| missing("never"))?,
        unknown.unwrap_or_default(),
    ))
}

/// All six estimands with their tests. The compliance-ratio correction is
/// applied when the unknown table has any count, and the retest correction
/// when fractions are given. Undefined estimands get empty cells and a note.
pub fn analyze(d: &TrialDecomposition, retest: Option<RetestFractions>, alpha: f64) -> Result<Table> {
    let corrections = Corrections {
        retest: retest.is_some(),
        compliance: !d.unknown.is_zero(),
    };
    let applied = match (corrections.retest, corrections.compliance) {
        (false, false) => "none",
        (true, false) => "retest",
        (false, true) => "compliance",
        (true, true) => "retest+compliance",
    };
    let obs = ObservedTrial::from_decomposition(d, retest.as_ref())?;
    let reconstructed = obs.reconstruct(corrections);

    let overall = d.overall();
    let results: [(Estimand, ietrial_core::Result<(f64, EstimateResult)>); 6] = [
        (Estimand::Rr, estimate(&overall, Estimand::Rr).map(|r| (r.point, r))),
        (Estimand::Rd, estimate(&overall, Estimand::Rd).map(|r| (r.point, r))),
        (Estimand::RrPos, obs.test(Stratum::Ever, corrections).map(|r| (r.point, r))),
        (
            Estimand::RdPos,
            obs.test(Stratum::Ever, corrections).and_then(|r| {
                let t = reconstructed.as_ref().map_err(Clone::clone)?;
                Ok((risk_difference(&t.ever)?, r))
            }),
        ),
        (Estimand::RrNeg, obs.test(Stratum::Never, corrections).map(|r| (r.point, r))),
        (
            Estimand::RdNeg,
            obs.test(Stratum::Never, corrections).and_then(|r| {
                let t = reconstructed.as_ref().map_err(Clone::clone)?;
                Ok((risk_difference(&t.never)?, r))
            }),
        ),
    ];

    let mut table = Table::new(["estimand", "estimate", "z", "p_two_sided", "reject", "corrections", "note"]);
    for (label, r) in results {
        let applies = if matches!(label, Estimand::Rr | Estimand::Rd) { "none" } else { applied };
        let row = match r {
            Ok((point, t)) => vec![
                Cell::Text(label.to_string()),
                Cell::Rate(point),
                Cell::Rate(t.z),
                Cell::Rate(t.p_two_sided),
                Cell::Bool(t.p_two_sided < alpha),
                Cell::Text(applies.into()),
                Cell::Empty,
            ],
            Err(e) => vec![
                Cell::Text(label.to_string()),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Text(applies.into()),
                Cell::Text(e.to_string()),
            ],
        };
        table.push(row);
    }
    Ok(table)
}
