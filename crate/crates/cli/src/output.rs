//! Record output. Field names carry SI units (`_N`, `_per_s`, `_rad_per_s`,
//! `_m`, ...); reduced quantities have none. Numbers are written in their
//! shortest round-trip form.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::Format;
use crate::error::{CliError, Result};

/// Version of the record and sweep schemas.
pub const SCHEMA_VERSION: u32 = 1;

/// Starts a record with the schema version and command name.
pub fn record(command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), SCHEMA_VERSION.into());
    m.insert("command".into(), command.into());
    m
}

/// Logarithms are `-inf` where a value vanishes; JSON has no infinity.
pub fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        x.into()
    } else {
        Value::Null
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join("; "),
        other => other.to_string(),
    }
}

/// Flattens nested objects into top-level columns; keys are already unique.
fn flatten(m: &Map<String, Value>, out: &mut Vec<(String, String)>) {
    for (k, v) in m {
        match v {
            Value::Object(inner) => flatten(inner, out),
            _ => out.push((k.clone(), csv_cell(v))),
        }
    }
}

pub fn render(rec: &Map<String, Value>, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rec).expect("records serialize");
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut cols = Vec::new();
            flatten(rec, &mut cols);
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Config(format!("csv: {e}"));
            w.write_record(cols.iter().map(|(k, _)| k)).map_err(io)?;
            w.write_record(cols.iter().map(|(_, v)| v)).map_err(io)?;
            Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
        }
    }
}

/// Writes to `out`, or to stdout when absent.
pub fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(CliError::io(path)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(CliError::io("<stdout>"))
        }
    }
}
