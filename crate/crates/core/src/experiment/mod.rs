//! Named experiments over seed grids, with CSV rows, a JSON summary and a
//! checksummed record.

pub mod config;
mod runners;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use config::{
    ChainConfig, EntropyConfig, EntropySource, ExperimentConfig, ExperimentKind, FamilyConfig, FlowConfig, JscalingConfig,
    LrbConfig, SchemeName, Seeds, TailsConfig, TimeavgConfig, TrotterConfig, TrotterMode, CONFIG_VERSION,
};

/// Frozen CSV column orders.
pub mod schema {
    pub const FLOW: &[&str] = &["seed", "residual", "max_eig_error", "steps"];
    pub const TAILS: &[&str] = &["seed", "c", "delta", "bound"];
    pub const ENTROPY: &[&str] = &["seed", "L", "cut", "S"];
    pub const JSCALING: &[&str] = &["seed", "d", "maxJ"];
    pub const LRB: &[&str] = &["seed", "t", "d", "norm"];
    pub const TIMEAVG: &[&str] = &["seed", "T", "patch", "residual", "bound"];
    pub const TROTTER: &[&str] = &["N", "gate_norm", "error"];
    pub const COUPLINGS: &[&str] = &["d", "s_bitmask", "J_s"];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
}

impl Cell {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Cell::Int(v) => v as f64,
            Cell::Float(v) => v,
        }
    }

    fn render(&self) -> String {
        match *self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(v),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

/// Shortest round-trip decimal, in exponent form outside `[1e-4, 1e15)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Rows under a fixed header, kept sorted by their leading columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::invariant(
                "csv schema",
                format!("row of {} cells under {} columns", row.len(), self.header.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.as_f64().total_cmp(&y.as_f64()))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    /// Values of column `name`.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// A named pass/fail condition; a failing check makes the run fail.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: serde_json::Value,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Serialize) -> Result<Self> {
        Ok(Check {
            name: name.into(),
            pass,
            detail: serde_json::to_value(detail)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub table: Option<Table>,
    /// Deterministic statistics of the rows.
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
    /// Extra files by relative path.
    pub artifacts: BTreeMap<String, Vec<u8>>,
    pub wall_clock_seconds: f64,
}

#[derive(Serialize)]
struct RecordFile<'a> {
    experiment: &'static str,
    config: &'a ExperimentConfig,
    rows: usize,
    summary: &'a serde_json::Value,
    checks: &'a [Check],
    pass: bool,
    wall_clock_seconds: f64,
    /// SHA-256 of every file written next to the record.
    checksums: BTreeMap<String, String>,
}

impl ExperimentRecord {
    pub fn csv_name(&self) -> String {
        format!("{}.csv", self.config.experiment.name())
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Every output file except `record.json`, by relative path.
    pub fn files(&self) -> Result<BTreeMap<String, Vec<u8>>> {
        let mut out = self.artifacts.clone();
        if let Some(t) = &self.table {
            out.insert(self.csv_name(), t.to_csv()?);
        }
        let mut summary = serde_json::to_vec_pretty(&serde_json::json!({
            "experiment": self.config.experiment.name(),
            "summary": self.summary,
            "checks": self.checks,
        }))?;
        summary.push(b'\n');
        out.insert("summary.json".into(), summary);
        out.insert("config.toml".into(), self.config.to_toml()?.into_bytes());
        Ok(out)
    }

    /// Write all outputs and `record.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<BTreeMap<String, String>> {
        let files = self.files()?;
        let mut checksums = BTreeMap::new();
        for (name, bytes) in &files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, bytes)?;
            checksums.insert(name.clone(), hex::encode(Sha256::digest(bytes)));
        }
        let record = RecordFile {
            experiment: self.config.experiment.name(),
            config: &self.config,
            rows: self.table.as_ref().map_or(0, |t| t.rows.len()),
            summary: &self.summary,
            checks: &self.checks,
            pass: self.pass(),
            wall_clock_seconds: self.wall_clock_seconds,
            checksums: checksums.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&record)?;
        bytes.push(b'\n');
        std::fs::write(dir.join("record.json"), bytes)?;
        Ok(checksums)
    }
}

/// What a runner returns before timing is attached.
pub(crate) struct Outcome {
    pub table: Option<Table>,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
    pub artifacts: BTreeMap<String, Vec<u8>>,
}

/// Run `config` on a pool of `config.threads` workers.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config {
            field: "threads".into(),
            reason: e.to_string(),
        })?;
    let start = Instant::now();
    let mut outcome = pool.install(|| runners::dispatch(config))?;
    if let Some(t) = outcome.table.as_mut() {
        t.sort();
    }
    Ok(ExperimentRecord {
        config: config.clone(),
        table: outcome.table,
        summary: outcome.summary,
        checks: outcome.checks,
        artifacts: outcome.artifacts,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_render_round_trip() {
        for v in [0.0, 1.0, -2.5, 1e-13, 3.25e-5, 12345.678, 1e20, 0.1 + 0.2] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(1e-13), "1e-13");
        assert_eq!(format_float(0.5), "0.5");
    }

    #[test]
    fn table_sorts_numerically() {
        let mut t = Table::new(schema::JSCALING);
        t.push(vec![10u64.into(), 1usize.into(), 0.5.into()]).unwrap();
        t.push(vec![2u64.into(), 3usize.into(), 0.25.into()]).unwrap();
        t.push(vec![2u64.into(), 1usize.into(), 1e-9.into()]).unwrap();
        assert!(t.push(vec![1u64.into()]).is_err());
        t.sort();
        let csv = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(csv, "seed,d,maxJ\n2,1,1e-9\n2,3,0.25\n10,1,0.5\n");
    }
}
