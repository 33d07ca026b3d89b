//! Tabular output as CSV or JSON.
//!
//! CSV prints rates to 6 significant digits and counts as plain integers.
//! JSON keeps every float at full precision, so parsing it back recovers
//! the exact bits.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Rate(f64),
    /// A count, possibly an expected (fractional) one. Values within
    /// rounding noise of a whole number print as that integer.
    Count(f64),
    /// Shortest decimal that parses back to the same value.
    Exact(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    /// A number as printed in a source table: the text goes to CSV, the
    /// value to JSON.
    Verbatim(String, f64),
    Empty,
}

impl Cell {
    pub fn rate(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Rate)
    }

    fn csv_field(&self) -> String {
        match self {
            Cell::Rate(v) => sig6(*v),
            Cell::Count(v) => count(*v),
            Cell::Exact(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) | Cell::Verbatim(s, _) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Rate(v) | Cell::Count(v) | Cell::Exact(v) | Cell::Verbatim(_, v) => {
                if v.is_finite() {
                    s.serialize_f64(*v)
                } else {
                    s.serialize_none()
                }
            }
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Empty => s.serialize_none(),
        }
    }
}

/// Format to 6 significant digits in positional notation.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // Exponent after rounding, so 9.999996 counts as 10.
    let sci = format!("{v:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (5 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

fn count(v: f64) -> String {
    let whole = v.round();
    if (v - whole).abs() <= 1e-9 * whole.abs().max(1.0) && whole.abs() < 1e15 {
        format!("{}", whole as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::csv_field))?;
        }
        out.flush()
    }

    /// An array of objects, keys in column order.
    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")
    }

    pub fn write<W: Write>(&self, format: Format, w: W) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::Json => self.write_json(w),
        }
    }
}

struct Row<'a>(&'a [String], &'a [Cell]);

impl Serialize for Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.rows.len()))?;
        for row in &self.rows {
            seq.serialize_element(&Row(&self.columns, row))?;
        }
        seq.end()
    }
}

/// Write to `path`, or stdout when `None`.
pub fn emit(table: &Table, format: Format, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(file);
            table.write(format, &mut w).map_err(|e| CliError::io(p, e))?;
            w.flush().map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            table.write(format, &mut w).map_err(CliError::Write)?;
            w.flush().map_err(CliError::Write)
        }
    }
}
