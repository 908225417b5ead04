//! Report assembly and the three output formats.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};

pub const REPORT_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub config: RunConfig,
    pub records: Vec<Value>,
    pub summary: Value,
}

/// `columns` fixes the CSV header and the table layout.
pub fn emit(report: &Report, columns: &[&str], out: &mut impl Write) -> std::io::Result<()> {
    match report.config.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(columns)?;
            for r in &report.records {
                w.write_record(columns.iter().map(|c| cell(r.get(*c))))?;
            }
            w.flush()
        }
        Format::Table => table(report, columns, out),
    }
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(other) => other.to_string(),
    }
}

fn short(v: Option<&Value>) -> String {
    match v {
        Some(Value::Number(n)) => match n.as_f64() {
            Some(x) if n.is_f64() => fixed_or_sci(x),
            _ => n.to_string(),
        },
        Some(Value::Array(a)) if a.iter().all(Value::is_number) => {
            let parts: Vec<String> = a.iter().map(|x| format!("{:.4}", x.as_f64().unwrap_or(f64::NAN))).collect();
            format!("[{}]", parts.join(", "))
        }
        other => cell(other),
    }
}

fn fixed_or_sci(x: f64) -> String {
    if x == 0.0 {
        "0.000000".into()
    } else if (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.3e}")
    }
}

fn table(report: &Report, columns: &[&str], out: &mut impl Write) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = report.records.iter().map(|r| columns.iter().map(|c| short(r.get(*c))).collect()).collect();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| rows.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ");
    if !rows.is_empty() {
        writeln!(out, "{}", line(&columns.iter().map(|c| c.to_string()).collect::<Vec<_>>()).trim_end())?;
        for r in &rows {
            writeln!(out, "{}", line(r).trim_end())?;
        }
    }
    if let Value::Object(map) = &report.summary {
        if !map.is_empty() {
            writeln!(out, "summary:")?;
            for (k, v) in map {
                writeln!(out, "  {k}: {}", short(Some(v)))?;
            }
        }
    }
    Ok(())
}

/// `{"index": i, "u": u, ...fields}` or `{"index": i, "u": u, "error": msg}`.
pub fn point_record(index: usize, u: &[f64], body: Result<Value, String>) -> Value {
    let mut map = Map::new();
    map.insert("index".into(), index.into());
    map.insert("u".into(), serde_json::json!(u));
    match body {
        Ok(Value::Object(fields)) => map.extend(fields),
        Ok(other) => {
            map.insert("value".into(), other);
        }
        Err(e) => {
            map.insert("error".into(), e.into());
        }
    }
    Value::Object(map)
}

/// Row-major nested arrays.
pub fn rows(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| serde_json::json!(r.iter().copied().collect::<Vec<f64>>())).collect())
}
