//! Run records and their CSV / JSON emission.

use crate::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use ultrapos_core::Verdict;

/// A CSV table with a fixed header. Cells are pre-formatted so that output
/// bytes depend only on the values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = Cell>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().map(|c| c.0).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// One CSV cell.
pub struct Cell(pub String);

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        // shortest round-trip form; NaN and infinities as plain words
        Cell(if v.is_nan() { "nan".into() } else { format!("{v:?}") })
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell(v.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// None when the stage aborted
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    /// the abort came from the numerics rather than the configuration
    pub numerical_abort: bool,
    pub seconds: f64,
    /// per-check verdicts, in evaluation order
    pub checks: Vec<(String, Verdict)>,
    pub data: serde_json::Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageRecord>,
    pub environment: Environment,
}

impl RunRecord {
    pub fn verdict(&self) -> Verdict {
        self.stages.iter().fold(Verdict::Pass, |acc, s| acc.and(s.verdict.unwrap_or(Verdict::Fail)))
    }

    /// 0 when nothing failed, 1 on any FAIL, 3 when a stage aborted numerically.
    pub fn exit_code(&self) -> i32 {
        if self.stages.iter().any(|s| s.numerical_abort) {
            3
        } else if self.verdict() == Verdict::Fail {
            1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

/// Write every table and the JSON report into `dir`; returns the paths written.
pub fn emit(record: &RunRecord, dir: &Path, format: Format) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let hash = &record.config_hash;
    if format != Format::Json {
        for stage in &record.stages {
            for table in &stage.tables {
                let path = dir.join(format!("{}-{hash}.csv", table.name));
                write_csv(table, &path)?;
                written.push(path);
            }
        }
    }
    if format != Format::Csv {
        let path = dir.join(format!("report-{}-{hash}.json", record.command));
        let text = serde_json::to_string_pretty(record).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_csv(table: &Table, path: &Path) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()
}
