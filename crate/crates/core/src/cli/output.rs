//! Artifacts, run metadata and atomic file output.

use crate::numeric::ExtReal;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

pub const TOOL: &str = "mfrep";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Provenance written into every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(command: &str, canonical_config: &[u8]) -> Self {
        Meta {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(canonical_config)),
        }
    }
}

/// A named table of JSON cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Number cell that keeps infinities as `"-inf"` / `"inf"`.
pub fn num(v: f64) -> Value {
    serde_json::to_value(ExtReal(v)).unwrap_or(Value::Null)
}

/// Result of one command: a summary object, tables and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub summary: Value,
    pub tables: Vec<Table>,
    pub passed: bool,
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn csv_bytes(meta: &Meta, table: &Table) -> std::io::Result<Vec<u8>> {
    let mut out = format!(
        "# tool={} version={} command={} config_sha256={}\n",
        meta.tool, meta.version, meta.command, meta.config_sha256
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(cell_text))?;
        }
        w.flush()?;
    }
    Ok(out)
}

fn json_bytes(value: &Value) -> std::io::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Write `bytes` to `dir/name` through a temporary file in `dir`.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

/// Write `summary.json` and one file per table; returns the file names written.
pub fn write_artifact(dir: &Path, meta: &Meta, artifact: &Artifact, format: Format) -> std::io::Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    let summary = json!({ "meta": meta, "passed": artifact.passed, "summary": artifact.summary });
    write_atomic(dir, "summary.json", &json_bytes(&summary)?)?;
    names.push("summary.json".to_string());
    for t in &artifact.tables {
        let (name, bytes) = match format {
            Format::Csv => (format!("{}.csv", t.name), csv_bytes(meta, t)?),
            Format::Json => (
                format!("{}.json", t.name),
                json_bytes(&json!({ "meta": meta, "columns": t.columns, "rows": t.rows }))?,
            ),
        };
        write_atomic(dir, &name, &bytes)?;
        names.push(name);
    }
    Ok(names)
}
