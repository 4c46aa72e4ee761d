//! Artifact rendering. JSON objects are `serde_json::Map`, which keeps keys
//! sorted; CSV floats use seventeen significant digits.

use std::io::Write;

use serde_json::{json, Value as Json};
use subspec::io::fmt_f64;

use crate::config::Params;
use crate::error::CliError;

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }
}

pub fn float(x: f64) -> String {
    fmt_f64(x)
}

pub struct Artifact {
    pub result: Json,
    pub table: Option<Table>,
    /// False when a verification step failed; the artifact is still written.
    pub verified: bool,
}

impl Artifact {
    pub fn json(result: Json) -> Self {
        Artifact { result, table: None, verified: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub fn format(p: &Params, default: Format) -> Result<Format, CliError> {
    let d = match default {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    match p.string("format", Some(d))?.as_str() {
        "json" => Ok(Format::Json),
        "csv" => Ok(Format::Csv),
        other => Err(CliError::invalid(format!("unknown format {other:?}; expected json or csv"))),
    }
}

pub fn render(p: &Params, fmt: Format, a: &Artifact) -> Result<Vec<u8>, CliError> {
    let config = p.resolved();
    let version = env!("CARGO_PKG_VERSION");
    match fmt {
        Format::Json => {
            let doc = json!({
                "command": p.command,
                "config": config,
                "result": a.result,
                "verified": a.verified,
                "version": version,
            });
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Numeric(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let table = a
                .table
                .as_ref()
                .ok_or_else(|| CliError::invalid(format!("{} has no csv output; use --format json", p.command)))?;
            let mut out = Vec::new();
            writeln!(out, "# subspec {version} {}", p.command)?;
            writeln!(out, "# config {}", serde_json::to_string(&config).map_err(|e| CliError::Numeric(e.to_string()))?)?;
            let mut w = csv::Writer::from_writer(&mut out);
            let csv_err = |e: csv::Error| CliError::Numeric(e.to_string());
            w.write_record(&table.header).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.flush()?;
            drop(w);
            Ok(out)
        }
    }
}
