//! Run directories: CSV tables, JSON records and plots, each tagged with the config hash.
//!
//! Every CSV starts with one comment line `# schema=<version> kind=<kind> config_hash=<hex>`
//! followed by a header row. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Version of the CSV column layouts.
pub const CSV_SCHEMA: u32 = 1;

#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    kind: String,
    config_hash: String,
    written: Vec<String>,
}

impl RunDir {
    pub fn create(path: &Path, kind: &str, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            kind: kind.to_string(),
            config_hash: config_hash.to_string(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn csv(&mut self, name: &str, header: &[&str]) -> Result<CsvTable> {
        let path = self.path.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut raw = BufWriter::new(file);
        writeln!(
            raw,
            "# schema={CSV_SCHEMA} kind={} config_hash={}",
            self.kind, self.config_hash
        )
        .map_err(|e| CliError::io(&path, e))?;
        let mut w = csv::Writer::from_writer(raw);
        w.write_record(header).map_err(|e| csv_error(&path, e))?;
        self.written.push(name.to_string());
        Ok(CsvTable { w, path })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.path.join(name);
        std::fs::write(&path, data).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

pub struct CsvTable {
    w: csv::Writer<BufWriter<File>>,
    path: PathBuf,
}

impl CsvTable {
    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// A CSV artifact read back: the config hash from its comment line, header and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub config_hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvData {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let first = text.lines().next().unwrap_or_default();
        let config_hash = first
            .split_whitespace()
            .find_map(|f| f.strip_prefix("config_hash="))
            .ok_or_else(|| CliError::Run(format!("{} carries no config hash", path.display())))?
            .to_string();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(String::from)
            .collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()
            .map_err(|e| csv_error(path, e))?;
        Ok(Self { config_hash, header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn floats(&self, col: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                r[col]
                    .parse::<f64>()
                    .map_err(|_| CliError::Run(format!("not a number: {:?}", r[col])))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One acceptance decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl GateRecord {
    pub fn new(name: impl Into<String>, estimate: f64, ci: (f64, f64), threshold: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            estimate,
            lower: ci.0,
            upper: ci.1,
            threshold,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub config_hash: String,
    pub passed: bool,
    pub gates: Vec<GateRecord>,
}

/// Writes `summary.json` and `summary.csv` (one row per gate).
pub fn write_summary(dir: &mut RunDir, gates: &[GateRecord]) -> Result<Summary> {
    let summary = Summary {
        kind: dir.kind.clone(),
        config_hash: dir.config_hash.clone(),
        passed: gates.iter().all(GateRecord::passed),
        gates: gates.to_vec(),
    };
    dir.json("summary.json", &summary)?;
    let mut t = dir.csv("gates.csv", &["gate", "estimate", "lower", "upper", "threshold", "verdict"])?;
    for g in gates {
        let verdict = if g.passed() { "pass" } else { "fail" };
        t.row([g.name.clone(), num(g.estimate), num(g.lower), num(g.upper), num(g.threshold), verdict.into()])?;
    }
    t.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hash: Option<String>,
    pub seed: u64,
    pub versions: Versions,
    pub wall_seconds: f64,
    pub artifacts: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub tilted: String,
    pub csv_schema: u32,
    pub checkpoint_format: u32,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            tilted: env!("CARGO_PKG_VERSION").to_string(),
            csv_schema: CSV_SCHEMA,
            checkpoint_format: tilted_core::sampler::FORMAT_VERSION,
        }
    }
}
