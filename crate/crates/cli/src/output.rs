use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Identifies the producing run in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
}

impl Meta {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Self { tool: "dualfp", version: env!("CARGO_PKG_VERSION"), command, seed }
    }

    pub fn csv_comment(&self) -> String {
        format!("# {} {} command={} seed={}\n", self.tool, self.version, self.command, self.seed)
    }
}

/// A table of rows, rendered as commented CSV or as JSON.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) => serde_json::json!(x),
            Cell::Int(i) => serde_json::json!(i),
            Cell::Text(s) => serde_json::json!(s),
        }
    }
}

impl Table {
    pub fn render(&self, meta: &Meta, format: Format) -> anyhow::Result<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut out = meta.csv_comment().into_bytes();
                writeln!(out, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(out, "{}", cells.join(","))?;
                }
                Ok(out)
            }
            Format::Json => {
                let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
                    .rows
                    .iter()
                    .map(|row| self.columns.iter().map(|c| c.to_string()).zip(row.iter().map(Cell::json)).collect())
                    .collect();
                json_bytes(&serde_json::json!({ "meta": meta, "rows": rows }))
            }
        }
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).with_context(|| format!("cannot write {}", p.display()))?);
            f.write_all(bytes)?;
            f.flush().with_context(|| format!("cannot write {}", p.display()))?;
        }
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".effective.toml");
    PathBuf::from(name)
}

/// Saves the effective configuration next to `out`; feeding it back through
/// `--config` reproduces the output byte for byte.
pub fn write_sidecar(out: &Path, config: &RunConfig) -> anyhow::Result<PathBuf> {
    let path = sidecar_path(out);
    let text = toml::to_string(config).context("serializing effective config")?;
    emit(Some(&path), text.as_bytes())?;
    Ok(path)
}
