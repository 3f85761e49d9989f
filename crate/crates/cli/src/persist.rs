//! Atomic artifact writes, CSV tables and the JSON run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;

pub const TOOL: &str = "waveguide";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A rectangular table written as CSV with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Cell formatting shared by every table: shortest round-trip floats
/// (exponent form for extreme magnitudes), empty for missing values.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for bool {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map(Cell::cell).unwrap_or_default()
    }
}

/// Write `bytes` to `dir/name` through a temporary file in the same directory.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

/// Run manifest. Field order is the serialised key order.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub stages: Vec<Stage>,
    pub outputs: Vec<String>,
    pub status: String,
    pub error: Option<ErrorRecord>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Collects stage timings and emitted files for one subcommand run.
pub struct Run {
    pub dir: PathBuf,
    pub subcommand: String,
    pub config: RunConfig,
    pub hash: String,
    started: Instant,
    started_unix: f64,
    stage_start: Instant,
    pub stages: Vec<Stage>,
    pub outputs: Vec<String>,
}

impl Run {
    pub fn new(dir: PathBuf, subcommand: &str, config: RunConfig) -> Self {
        let hash = config.hash();
        let now = Instant::now();
        Self {
            dir,
            subcommand: subcommand.into(),
            config,
            hash,
            started: now,
            started_unix: unix_now(),
            stage_start: now,
            stages: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// `<subcommand>-<first 12 hex digits of the hash>`
    pub fn stem(&self) -> String {
        format!("{}-{}", self.subcommand, &self.hash[..12])
    }

    pub fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.stem())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(self.manifest_name())
    }

    /// Close the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(Stage {
            name: name.into(),
            seconds: (now - self.stage_start).as_secs_f64(),
        });
        self.stage_start = now;
    }

    /// Write `<stem><suffix>` and record it.
    pub fn emit(&mut self, suffix: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let name = format!("{}{}", self.stem(), suffix);
        let path = write_atomic(&self.dir, &name, bytes)?;
        self.outputs.push(name);
        Ok(path)
    }

    pub fn emit_table(&mut self, suffix: &str, table: &Table) -> std::io::Result<PathBuf> {
        self.emit(suffix, &table.to_csv())
    }

    pub fn finish(&self, error: Option<ErrorRecord>) -> std::io::Result<PathBuf> {
        let manifest = RunManifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            subcommand: self.subcommand.clone(),
            config_hash: self.hash.clone(),
            config: self.config.clone(),
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            wall_seconds: self.started.elapsed().as_secs_f64(),
            stages: self.stages.clone(),
            outputs: self.outputs.clone(),
            status: if error.is_none() {
                "ok".into()
            } else {
                "error".into()
            },
            error,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
        text.push(b'\n');
        write_atomic(&self.dir, &self.manifest_name(), &text)
    }
}
