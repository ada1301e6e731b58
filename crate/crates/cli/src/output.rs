//! CSV tables and the JSON run summary.

use std::fs;
use std::path::Path;

use serde::Serialize;
use topochain::ensemble::SeedManifest;

use crate::error::{CliError, Result};

pub const TRACE_FILE: &str = "trace.csv";
pub const TABLE_FILE: &str = "table.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ECHO_FILE: &str = "config.echo.json";

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    /// Floats carry 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Self::Num(x) => format!("{x:.16e}"),
            Self::Int(n) => n.to_string(),
            Self::Bool(b) => b.to_string(),
            Self::Text(s) => s.clone(),
            Self::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Self::Int(n as i64)
    }
}

impl From<i32> for Cell {
    fn from(n: i32) -> Self {
        Self::Int(n.into())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Self::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_owned())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Self::Empty, Into::into)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Numerical(format!("csv encoding: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Numerical(format!("csv encoding: {e}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub version: &'static str,
    pub protocol: &'static str,
    pub seed_manifest: SeedManifest,
    pub results: serde_json::Value,
    pub diagnostics: serde_json::Value,
    pub warnings: Vec<String>,
    pub violations: Vec<String>,
}

/// Everything a run writes.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub trace: Option<Table>,
    pub table: Option<Table>,
    pub summary: Summary,
    pub echo: String,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_artifacts(dir: &Path, artifacts: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if let Some(t) = &artifacts.trace {
        write(&dir.join(TRACE_FILE), &t.to_csv()?)?;
    }
    if let Some(t) = &artifacts.table {
        write(&dir.join(TABLE_FILE), &t.to_csv()?)?;
    }
    let mut summary = serde_json::to_string_pretty(&artifacts.summary)
        .map_err(|e| CliError::Numerical(format!("summary encoding: {e}")))?;
    summary.push('\n');
    write(&dir.join(SUMMARY_FILE), summary.as_bytes())?;
    write(&dir.join(ECHO_FILE), artifacts.echo.as_bytes())
}
