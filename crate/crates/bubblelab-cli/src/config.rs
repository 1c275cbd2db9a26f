//! Configuration files merged with command-line flags.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use anyhow::Result;
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use bubblelab::quadrature::QuadSpec;

/// Validation failure raised by the front end itself.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid input: {}", self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

/// Keys of a configuration file that apply to every command.
pub const GLOBAL_KEYS: [&str; 3] = ["command", "threads", "cache-dir"];

pub fn load(path: &Path) -> Result<Map<String, Value>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(invalid("the config file must hold a JSON object")),
        Err(e) => Err(invalid(format!("config {}: {e}", path.display()))),
    }
}

/// Overlays non-null flag values onto the file section and deserializes the result.
///
/// File keys that the command does not know are rejected.
pub fn resolve<T: Serialize + DeserializeOwned + Default>(flags: &T, file: Option<&Map<String, Value>>) -> Result<T> {
    let known: BTreeSet<String> = match serde_json::to_value(T::default())? {
        Value::Object(m) => m.into_iter().map(|(k, _)| k).collect(),
        _ => BTreeSet::new(),
    };
    let mut merged = Map::new();
    if let Some(file) = file {
        for (k, v) in file {
            if GLOBAL_KEYS.contains(&k.as_str()) {
                continue;
            }
            if !known.contains(k) {
                return Err(invalid(format!("unknown config key '{k}'")));
            }
            merged.insert(k.clone(), v.clone());
        }
    }
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| invalid(format!("config: {e}")))
}

/// Quadrature resolution flags.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct QuadArgs {
    /// Gauss–Legendre order per panel.
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Panel multiplier.
    #[arg(long)]
    pub quad_subdivisions: Option<usize>,
    /// Convergence tolerance.
    #[arg(long)]
    pub quad_tol: Option<f64>,
}

impl QuadArgs {
    pub fn spec(&self) -> Result<QuadSpec> {
        let d = QuadSpec::default();
        let s = QuadSpec {
            order: self.quad_order.unwrap_or(d.order),
            subdivisions: self.quad_subdivisions.unwrap_or(d.subdivisions),
            tol: self.quad_tol.unwrap_or(d.tol),
        };
        if s.order < 2 || s.subdivisions < 1 || !(s.tol > 0.0) {
            return Err(invalid("quadrature needs order >= 2, subdivisions >= 1 and a positive tolerance"));
        }
        Ok(s)
    }
}

/// Output flags.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct OutArgs {
    /// Output file.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// csv or json; inferred from the extension when absent.
    #[arg(long)]
    pub format: Option<String>,
}

/// Required value or a validation error naming the flag.
pub fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| invalid(format!("--{flag} is required")))
}
