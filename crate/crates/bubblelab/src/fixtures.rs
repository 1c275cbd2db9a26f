//! Reference values recomputed from scratch and compared against a stored file.

use serde::{Deserialize, Serialize};

use crate::dynamics::{euclidean_eep_constant, radial_lambda1, OuterCondition};
use crate::energy::GnModel;
use crate::error::{invalid, Result};
use crate::moments::{escobar_constants, weighted_moments};
use crate::profiles::escobar_halfspace_optimizer;
use crate::quadrature::QuadSpec;
use crate::reduced::{critical_point_search, Domain, Field, SearchOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// File name of the reference set inside a fixture directory.
pub const FILE_NAME: &str = "reference.json";

/// Directory of the reference set shipped with the crate.
pub fn default_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    pub name: String,
    pub value: f64,
    /// Allowed |stored - recomputed| / max(1, |stored|).
    pub tolerance: f64,
    /// How the value is produced.
    pub oracle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    pub schema_version: u32,
    /// Date of generation, YYYY-MM-DD.
    pub generated: String,
    pub quadrature: QuadSpec,
    pub entries: Vec<FixtureEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCheck {
    pub name: String,
    pub stored: f64,
    pub recomputed: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub checks: Vec<EntryCheck>,
    /// Stored names that were not recomputed, and recomputed names missing from the file.
    pub missing: Vec<String>,
    pub unexpected: Vec<String>,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .chain(self.missing.iter().map(String::as_str))
            .collect()
    }
}

fn entry(name: impl Into<String>, value: f64, tolerance: f64, oracle: &str) -> FixtureEntry {
    FixtureEntry { name: name.into(), value, tolerance, oracle: oracle.into() }
}

/// Recomputes every reference value at the given quadrature resolution.
pub fn compute(spec: &QuadSpec) -> Result<Vec<FixtureEntry>> {
    let mut out = Vec::new();
    let moments_oracle = "Gauss-Legendre moments of the half-space optimizer, inversion tail, doubled-rule check";
    for n in 4..=8 {
        let profile = escobar_halfspace_optimizer(n)?;
        let c = escobar_constants(n, &weighted_moments(&profile, 25.0, spec)?, 1e-6)?;
        out.push(entry(format!("escobar/n={n}/s_star"), c.s_star, 1e-9, moments_oracle));
        out.push(entry(format!("escobar/n={n}/theta"), c.theta, 1e-9, moments_oracle));
        out.push(entry(format!("escobar/n={n}/rho_conf_bracket"), c.rho_conf_bracket, 1e-9, moments_oracle));
        if let Some(g2) = c.second_moment {
            out.push(entry(format!("escobar/n={n}/second_moment"), g2, 1e-9, moments_oracle));
        }
    }
    let gn_oracle = "shooting ground state, shifted half-space near-optimizer, Cartesian Gauss-Legendre moments";
    for n in [2usize, 3] {
        let m = GnModel::build(n, 3.0, 0.05, 20.0, spec)?;
        out.push(entry(format!("gn/n={n}/p=3/c_star"), m.coefficients.c_star, 1e-9, gn_oracle));
        out.push(entry(format!("gn/n={n}/p=3/kappa_bdy"), m.coefficients.kappa_bdy, 1e-8, gn_oracle));
        out.push(entry(format!("gn/n={n}/p=3/kappa_int"), m.coefficients.kappa_int, 1e-8, gn_oracle));
    }
    out.push(entry("eep/n=2/m=0.5/euclidean_constant", euclidean_eep_constant(2, 0.5)?, 1e-9, gn_oracle));
    let shoot = "radial shooting in log r with Dormand-Prince 5(4), bisection on the first sign change";
    let tol = if spec.order >= QuadSpec::high().order { 1e-12 } else { 1e-10 };
    out.push(entry("window/disk/n=2/lambda1", radial_lambda1(2, 0.0, OuterCondition::Dirichlet, tol)?, 1e-8, shoot));
    for n in [2usize, 3] {
        let l = radial_lambda1(n, 1e-3, OuterCondition::Neumann, tol)?;
        out.push(entry(format!("window/n={n}/d=1e-3/lambda1"), l, 1e-8, shoot));
    }
    let search =
        critical_point_search(&Field::cos(2.0), Domain::Circle, 2, &SearchOptions { seeds: 32, ..Default::default() })?;
    let lowest = search.critical_points.first().ok_or_else(|| invalid("no critical configuration found"))?;
    out.push(entry(
        "reduced/circle/cos2theta/k=2/critical_count",
        search.critical_points.len() as f64,
        0.0,
        "multi-start Newton with logarithmic barrier, 32 seeds",
    ));
    out.push(entry(
        "reduced/circle/cos2theta/k=2/min_value",
        lowest.value,
        1e-12,
        "multi-start Newton with logarithmic barrier",
    ));
    Ok(out)
}

/// Full reference file at the given resolution.
pub fn regenerate(spec: &QuadSpec, date: &str) -> Result<FixtureFile> {
    Ok(FixtureFile {
        schema_version: SCHEMA_VERSION,
        generated: date.to_string(),
        quadrature: *spec,
        entries: compute(spec)?,
    })
}

/// Compares a stored file against freshly computed entries.
pub fn compare(stored: &FixtureFile, recomputed: &[FixtureEntry]) -> Result<VerifyReport> {
    if stored.schema_version != SCHEMA_VERSION {
        return Err(invalid(format!("fixture schema {} differs from {}", stored.schema_version, SCHEMA_VERSION)));
    }
    let mut checks = Vec::new();
    let mut missing = Vec::new();
    for s in &stored.entries {
        match recomputed.iter().find(|r| r.name == s.name) {
            Some(r) => {
                let deviation = (s.value - r.value).abs() / s.value.abs().max(1.0);
                checks.push(EntryCheck {
                    name: s.name.clone(),
                    stored: s.value,
                    recomputed: r.value,
                    deviation,
                    tolerance: s.tolerance,
                    pass: deviation <= s.tolerance,
                });
            }
            None => missing.push(s.name.clone()),
        }
    }
    let unexpected: Vec<String> = recomputed
        .iter()
        .filter(|r| !stored.entries.iter().any(|s| s.name == r.name))
        .map(|r| r.name.clone())
        .collect();
    let pass = missing.is_empty() && unexpected.is_empty() && checks.iter().all(|c| c.pass);
    Ok(VerifyReport { pass, checks, missing, unexpected })
}

/// Recomputes at `spec` and compares against `stored`.
pub fn verify(stored: &FixtureFile, spec: &QuadSpec) -> Result<VerifyReport> {
    compare(stored, &compute(spec)?)
}
