use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// One experiment run as emitted on stdout.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub experiment: &'static str,
    pub artifact_version: &'static str,
    pub seed: u64,
    pub inputs: Value,
    pub outputs: Value,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn new(experiment: &'static str, seed: u64, inputs: Value, outputs: Value, pass: bool) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            artifact_version: env!("CARGO_PKG_VERSION"),
            seed,
            inputs,
            outputs,
            pass,
            wall_time_s: 0.0,
        }
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Writes the scalar entries of `outputs` as `key,value` rows.
pub fn write_scalars_csv(path: &Path, outputs: &Value) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "key,value")?;
    let mut rows = Vec::new();
    flatten("", outputs, &mut rows);
    for (key, value) in rows {
        writeln!(out, "{key},{value}")?;
    }
    out.flush()?;
    Ok(())
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, rows);
            }
        }
        Value::Number(n) => rows.push((prefix.to_string(), format_number(n.as_f64().unwrap_or(f64::NAN)))),
        Value::Bool(b) => rows.push((prefix.to_string(), b.to_string())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Array(_) | Value::Null => {}
    }
}

/// 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x:.16e}")
    }
}
