//! Atomic file output, JSON envelopes and CSV tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::invalid;

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Pretty JSON with a trailing newline; floats use the shortest round-trip form.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: &'a C,
    pub constants: Value,
    pub result: R,
}

pub fn write_json<C: Serialize, R: Serialize>(
    path: &Path,
    command: &str,
    config: &C,
    constants: Value,
    result: R,
) -> Result<()> {
    let env = Envelope { schema_version: SCHEMA_VERSION, command, config, constants, result };
    write_atomic(path, to_json(&env)?.as_bytes())
}

/// Shortest round-trip text of a float.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
    } else {
        x.to_string()
    }
}

/// Row of floats as CSV cells.
pub fn float_row(row: &[f64]) -> Vec<String> {
    row.iter().map(|x| format_float(*x)).collect()
}

/// CSV with a header row; the metadata envelope goes to `<path>.meta.json`.
pub fn write_csv<C: Serialize, R: Serialize>(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
    command: &str,
    config: &C,
    constants: Value,
    meta: R,
) -> Result<PathBuf> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    write_atomic(path, &bytes)?;
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta.json");
    let meta_path = PathBuf::from(meta_path);
    write_json(&meta_path, command, config, constants, serde_json::json!({ "columns": header, "details": meta }))?;
    Ok(meta_path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Output path and format from flags, extension, or the command default.
pub fn resolve_output(
    out: Option<&PathBuf>,
    format: Option<&str>,
    default: &str,
    allowed: &[Format],
) -> Result<(PathBuf, Format)> {
    let path = out.cloned().unwrap_or_else(|| PathBuf::from(default));
    let fmt = match format {
        Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        Some(other) => return Err(invalid(format!("unknown output format '{other}' (csv or json)"))),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Format::Csv,
            _ => Format::Json,
        },
    };
    if !allowed.contains(&fmt) {
        return Err(invalid(format!("this command does not write {fmt:?} output")));
    }
    Ok((path, fmt))
}
