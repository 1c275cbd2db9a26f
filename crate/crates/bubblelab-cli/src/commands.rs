//! Subcommand implementations.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use bubblelab::dynamics::{
    capacity_blowup_bound, extinction_time_lower, extinction_witness, ode_decay_check, parse_ladder,
    small_window_lambda1, DecayParams, EepConstant, OuterCondition,
};
use bubblelab::energy::DeficitSource;
use bubblelab::energy::{channel_fit_second_order, fit_relative, EscobarBubble, GnModel, QuotientResult};
use bubblelab::estimators::{
    empirical_order, estimated_surface_fields, exact_surface_fields, gauss_bonnet_recovery, gn_boundary_h_from_metric,
    gn_interior_scal_from_point, hat_h_sweep, ring_ii_estimator, three_scale_sweep, ChannelWeights, EstimatorReport,
    ObservabilityConstants, Surface,
};
use bubblelab::fit::dyadic_grid;
use bubblelab::fixtures;
use bubblelab::geometry::{fermi_jet, BoundaryPointData, ChartMetric, InteriorPointData, ModelGeometry};
use bubblelab::moments::{
    escobar_constants, second_moment_identity, verify_harmonic_identities, weighted_moments, EscobarConstants,
};
use bubblelab::ode::OdeOptions;
use bubblelab::profiles::escobar_halfspace_optimizer;
use bubblelab::quadrature::QuadSpec;
use bubblelab::reduced::{
    balance_law_residual, critical_point_search, quantized_level, scale_jacobian, Configuration, Domain, Field,
    InteractionKernel, ReducedModel, SearchOptions,
};

use crate::config::{invalid, required, OutArgs, QuadArgs};
use crate::output::{float_row, format_float, resolve_output, write_csv, write_json, Format};

/// Context shared by every command.
pub struct Ctx {
    pub command: String,
    pub cache_dir: Option<PathBuf>,
}

fn escobar_constants_for(n: usize, spec: &QuadSpec) -> Result<EscobarConstants> {
    let profile = escobar_halfspace_optimizer(n)?;
    let table = weighted_moments(&profile, 25.0, spec)?;
    Ok(escobar_constants(n, &table, 1e-6)?)
}

fn snapshot<T: Serialize>(key: &str, value: &T) -> Result<Value> {
    Ok(json!({ key: serde_json::to_value(value)? }))
}

fn positive(v: f64, flag: &str) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("--{flag} must be positive, got {v}")));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// moments

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MomentsArgs {
    /// Dimension (n >= 4).
    #[arg(long)]
    pub n: Option<usize>,
    /// Cutoff radius R of the truncated optimizer.
    #[arg(long, visible_alias = "R")]
    pub radius: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

/// (name, value, error estimate) rows of a named-value CSV.
fn named_rows(rows: &[(&str, Option<f64>, Option<f64>)]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|(name, v, e)| {
            vec![name.to_string(), v.map(format_float).unwrap_or_default(), e.map(format_float).unwrap_or_default()]
        })
        .collect()
}

const NAMED_HEADER: [&str; 3] = ["name", "value", "error_estimate"];

pub fn moments(ctx: &Ctx, a: &MomentsArgs) -> Result<String> {
    let n = required(&a.n, "n")?;
    let radius = a.radius.unwrap_or(25.0);
    let spec = a.quad.spec()?;
    let (path, fmt) =
        resolve_output(a.output.out.as_ref(), a.output.format.as_deref(), "table.json", &[Format::Json, Format::Csv])?;
    let profile = escobar_halfspace_optimizer(n)?;
    let table = weighted_moments(&profile, radius, &spec)?;
    let constants = escobar_constants(n, &table, 1e-6)?;
    let entries: Vec<Value> = table
        .extrapolated
        .named()
        .iter()
        .zip(table.extrapolated_error.named())
        .zip(table.at_cutoff.named().iter().zip(table.at_cutoff_error.named()))
        .map(|(((name, ext), (_, ext_err)), ((_, cut), (_, cut_err)))| {
            json!({
                "name": name,
                "extrapolated": ext,
                "extrapolated_error": ext_err,
                "at_cutoff": cut,
                "at_cutoff_error": cut_err,
            })
        })
        .collect();
    let harmonic = verify_harmonic_identities(&table, 1e-5)?;
    let second = if n >= 5 { Some(second_moment_identity(&table, 1e-5)?) } else { None };
    let theta = table.extrapolated.trace_l2;
    let identities = json!({ "harmonic": harmonic, "second": second });
    match fmt {
        Format::Json => write_json(
            &path,
            &ctx.command,
            a,
            snapshot("escobar", &constants)?,
            json!({ "n": n, "radius": radius, "quadrature": spec, "entries": entries, "identities": identities }),
        )?,
        Format::Csv => {
            let named: Vec<(&str, Option<f64>, Option<f64>)> = table
                .extrapolated
                .named()
                .iter()
                .zip(table.extrapolated_error.named())
                .map(|((name, v), (_, e))| (*name, *v, e))
                .collect();
            let meta = json!({ "n": n, "radius": radius, "quadrature": spec, "values": "extrapolated to R = infinity", "identities": identities });
            write_csv(
                &path,
                &NAMED_HEADER,
                &named_rows(&named),
                &ctx.command,
                a,
                snapshot("escobar", &constants)?,
                meta,
            )?;
        }
    }
    Ok(format!(
        "moments n={n}: theta={theta} first={} S*={} -> {}",
        table.extrapolated.first,
        constants.s_star,
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// coefficients

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CoefficientsArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// escobar or gn.
    #[arg(long)]
    pub family: Option<String>,
    /// GN exponent p.
    #[arg(long)]
    pub p: Option<f64>,
    /// Also fit κ₁, κ₂, κ₃ from channel-isolating jets (slow).
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub fit_channels: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

pub fn coefficients(ctx: &Ctx, a: &CoefficientsArgs) -> Result<String> {
    let n = required(&a.n, "n")?;
    let spec = a.quad.spec()?;
    let (path, fmt) = resolve_output(
        a.output.out.as_ref(),
        a.output.format.as_deref(),
        "coefficients.json",
        &[Format::Json, Format::Csv],
    )?;
    let (rows, constants, result, summary) = match a.family.as_deref().unwrap_or("escobar") {
        "escobar" => {
            let mut c = escobar_constants_for(n, &spec)?;
            let nf = n as f64;
            let fit = if a.fit_channels.unwrap_or(false) {
                let profile = escobar_halfspace_optimizer(n)?;
                let f = channel_fit_second_order(&profile, &c, &dyadic_grid(1e-2, 6), 0.25, &spec)?;
                bubblelab::energy::apply_channel_fit(&mut c, &f);
                Some(f)
            } else {
                None
            };
            let rows = named_rows(&[
                ("s_star", Some(c.s_star), None),
                ("theta", Some(c.theta), None),
                ("rho_conf", Some(c.rho_conf), None),
                ("rho_conf_bracket", Some(c.rho_conf_bracket), Some((c.rho_conf_bracket - c.rho_conf).abs())),
                ("rho_plain", Some(c.rho_plain), None),
                ("second_moment", c.second_moment, None),
                ("kappa1", c.kappa1, None),
                ("kappa2", c.kappa2, None),
                ("kappa3", c.kappa3, None),
                (
                    "kappa3_fit",
                    fit.as_ref().map(|f| f.kappa3_fit),
                    fit.as_ref().map(|f| (f.kappa3_fit - f.kappa3_moment).abs()),
                ),
                ("kappa3_with_scal", fit.as_ref().map(|f| f.kappa3_with_scal), None),
                ("scal_weight", c.scal_weight, None),
            ]);
            let result = json!({
                "theta_closed_form": if n > 3 { Some(2.0 / (nf - 3.0)) } else { None },
                "rho_conf": c.rho_conf,
                "rho_conf_bracket": c.rho_conf_bracket,
                "rho_relative_gap": ((c.rho_conf_bracket - c.rho_conf) / c.rho_conf).abs(),
                "rho_plain": c.rho_plain,
                "kappa3": c.kappa3,
                "kappa3_over_second_moment": c.kappa3.zip(c.second_moment).map(|(k, g)| k / g),
                "kappa3_ratio_closed_form": (4.0 - nf) / (2.0 * (nf - 1.0)),
                "scal_weight": c.scal_weight,
                "channel_fit": fit,
            });
            let summary = format!("coefficients n={n}: S*={} rho_conf={} kappa3={:?}", c.s_star, c.rho_conf, c.kappa3);
            (rows, snapshot("escobar", &c)?, result, summary)
        }
        "gn" => {
            let p = a.p.unwrap_or(3.0);
            let m = GnModel::build(n, p, 0.05, 20.0, &spec)?;
            let c = &m.coefficients;
            let rows = named_rows(&[
                ("c_star", Some(c.c_star), None),
                ("kappa_bdy", Some(c.kappa_bdy), None),
                ("kappa_int", Some(c.kappa_int), None),
            ]);
            let result = json!({ "c_star": c.c_star, "kappa_bdy": c.kappa_bdy, "kappa_int": c.kappa_int });
            let summary = format!(
                "coefficients gn n={n} p={p}: C*={} kappa_bdy={} kappa_int={}",
                c.c_star, c.kappa_bdy, c.kappa_int
            );
            (rows, snapshot("gn", c)?, result, summary)
        }
        other => return Err(invalid(format!("unknown family '{other}' (escobar or gn)"))),
    };
    match fmt {
        Format::Json => write_json(&path, &ctx.command, a, constants, result)?,
        Format::Csv => {
            write_csv(&path, &NAMED_HEADER, &rows, &ctx.command, a, constants, result)?;
        }
    }
    Ok(format!("{summary} -> {}", path.display()))
}

// ---------------------------------------------------------------------------
// shared geometry resolution

enum Metric {
    Exact(bubblelab::geometry::ExactBall),
    Jet(bubblelab::geometry::AveragedJet),
}

impl Metric {
    fn as_dyn(&self) -> &dyn ChartMetric {
        match self {
            Metric::Exact(m) => m,
            Metric::Jet(m) => m,
        }
    }
}

/// Boundary data from a catalog name or a BoundaryPointData JSON file, with its chart metric.
///
/// Catalog geometries with a closed-form metric use it when `exact` is set; everything else uses
/// the averaged Fermi jet.
fn boundary_metric(
    name: &str,
    file: Option<&PathBuf>,
    n: usize,
    jet_order: u8,
    exact: bool,
) -> Result<(BoundaryPointData, Metric)> {
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read geometry {}: {e}", path.display())))?;
        let data: BoundaryPointData =
            serde_json::from_str(&text).map_err(|e| invalid(format!("geometry {}: {e}", path.display())))?;
        if data.n != n {
            return Err(invalid(format!("geometry file is for n = {}, not n = {n}", data.n)));
        }
        data.validate()?;
        let metric = Metric::Jet(fermi_jet(&data, jet_order)?.averaged());
        return Ok((data, metric));
    }
    let geometry = ModelGeometry::parse(name)?;
    let data = geometry.boundary_data(n)?;
    let metric = match geometry.exact_metric(n) {
        Some(m) if exact => Metric::Exact(m),
        _ => Metric::Jet(fermi_jet(&data, jet_order)?.averaged()),
    };
    Ok((data, metric))
}

/// Label of the geometry source for summaries.
fn geometry_label(name: Option<&String>, file: Option<&PathBuf>, default: &str) -> String {
    match (file, name) {
        (Some(f), _) => f.display().to_string(),
        (None, Some(n)) => n.clone(),
        (None, None) => default.to_string(),
    }
}

/// Interior point named "flat" or "round" (Scal = 1).
fn interior_point(name: &str, n: usize) -> Result<InteriorPointData> {
    match name {
        "flat" => Ok(InteriorPointData::flat(n)),
        "round" => Ok(InteriorPointData::round(n, 1.0 / (n as f64 * (n as f64 - 1.0)))),
        other => Err(invalid(format!("unknown interior geometry '{other}' (flat or round)"))),
    }
}

// ---------------------------------------------------------------------------
// expand

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExpandArgs {
    /// Catalog geometry (ball, flat, umbilic, anisotropic, ricci-only, scal-only; flat or round for gn-interior).
    #[arg(long)]
    pub geometry: Option<String>,
    /// BoundaryPointData JSON file used instead of a catalog geometry.
    #[arg(long, conflicts_with = "geometry")]
    pub geometry_file: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of dyadic levels ε₀, ε₀/2, ….
    #[arg(long)]
    pub eps_levels: Option<usize>,
    /// Coarsest scale ε₀.
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Cutoff radius R.
    #[arg(long)]
    pub radius: Option<f64>,
    /// escobar, plain-trace, gn-boundary or gn-interior.
    #[arg(long)]
    pub functional: Option<String>,
    /// Fermi-jet order for catalog geometries without an exact metric.
    #[arg(long)]
    pub jet_order: Option<u8>,
    /// GN exponent p.
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

pub fn expand(ctx: &Ctx, a: &ExpandArgs) -> Result<String> {
    if a.geometry.is_none() && a.geometry_file.is_none() {
        return Err(invalid("--geometry or --geometry-file is required"));
    }
    let name = geometry_label(a.geometry.as_ref(), a.geometry_file.as_ref(), "");
    let file = a.geometry_file.as_ref();
    let n = required(&a.n, "n")?;
    let levels = a.eps_levels.unwrap_or(6);
    if levels == 0 {
        return Err(invalid("--eps-levels must be at least 1"));
    }
    let eps0 = positive(a.eps0.unwrap_or(1e-2), "eps0")?;
    let spec = a.quad.spec()?;
    let functional = a.functional.clone().unwrap_or_else(|| "escobar".into());
    let jet_order = a.jet_order.unwrap_or(2);
    let grid = dyadic_grid(eps0, levels);
    let (path, fmt) =
        resolve_output(a.output.out.as_ref(), a.output.format.as_deref(), "sweep.csv", &[Format::Csv, Format::Json])?;
    let (results, constants): (Vec<QuotientResult>, Value) = match functional.as_str() {
        "escobar" | "plain-trace" => {
            let (_, metric) = boundary_metric(&name, file, n, jet_order, true)?;
            let profile = escobar_halfspace_optimizer(n)?;
            let bubble = EscobarBubble::new(&profile, a.radius.unwrap_or(25.0), &spec)?;
            let results = grid
                .iter()
                .map(|&eps| {
                    if functional == "escobar" {
                        bubble.escobar_quotient(metric.as_dyn(), eps, 1.0)
                    } else {
                        bubble.plain_trace_quotient(metric.as_dyn(), eps, 1.0, false)
                    }
                })
                .collect::<bubblelab::Result<Vec<_>>>()?;
            (results, snapshot("escobar", &escobar_constants_for(n, &spec)?)?)
        }
        "gn-boundary" | "gn-interior" => {
            let model = GnModel::build(n, a.p.unwrap_or(3.0), 0.05, a.radius.unwrap_or(20.0), &spec)?;
            let results = if functional == "gn-boundary" {
                let (_, metric) = boundary_metric(&name, file, n, jet_order, true)?;
                grid.iter()
                    .map(|&eps| model.bubble.boundary_quotient(metric.as_dyn(), eps))
                    .collect::<bubblelab::Result<Vec<_>>>()?
            } else {
                let jet = interior_point(&name, n)?.jet(1.0)?;
                grid.iter()
                    .map(|&eps| model.bubble.interior_quotient(&jet, eps))
                    .collect::<bubblelab::Result<Vec<_>>>()?
            };
            (results, snapshot("gn", &model.coefficients)?)
        }
        other => return Err(invalid(format!("unknown functional '{other}'"))),
    };
    let slope = if results.len() >= 3 { fit_relative(&results, &[1, 2]).ok().map(|f| f.coeffs[0]) } else { None };
    let header = ["eps", "numerator", "denominator", "quotient", "deficit", "err_est"];
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| float_row(&[r.epsilon, r.numerator, r.denominator, r.quotient, r.deficit, r.error_estimate]))
        .collect();
    let meta = json!({
        "geometry": name,
        "functional": functional,
        "normalization": "numerator and denominator of the quotient; deficit = quotient - reference; err_est = doubled-rule change of the relative deficit",
        "first_order_fit": slope,
        "reference": results.first().map(|r| r.reference),
        "flat_quotient": results.first().map(|r| r.flat_quotient),
    });
    match fmt {
        Format::Csv => {
            write_csv(&path, &header, &rows, &ctx.command, a, constants, meta)?;
        }
        Format::Json => write_json(&path, &ctx.command, a, constants, json!({ "levels": results, "summary": meta }))?,
    }
    Ok(format!(
        "expand {name} n={n} {functional}: {levels} levels, first-order relative slope {:?} -> {}",
        slope,
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EstimateArgs {
    /// H, mass, theta, ringII or scal.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub geometry: Option<String>,
    /// BoundaryPointData JSON file used instead of a catalog geometry.
    #[arg(long, conflicts_with = "geometry")]
    pub geometry_file: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Coarsest scale.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Number of dyadic levels.
    #[arg(long)]
    pub sweep: Option<usize>,
    /// Cutoff radius R.
    #[arg(long)]
    pub radius: Option<f64>,
    /// escobar or gn; gn is implied for n <= 3 and for scal.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub jet_order: Option<u8>,
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

fn attach_order(reports: &mut [EstimatorReport]) -> Option<f64> {
    let eps: Vec<f64> = reports.iter().map(|r| r.epsilons[0]).collect();
    let errs: Option<Vec<f64>> = reports.iter().map(|r| r.error).collect();
    let order = errs.and_then(|e| empirical_order(&eps, &e).ok());
    for r in reports.iter_mut() {
        r.empirical_order = order;
    }
    order
}

pub fn estimate(ctx: &Ctx, a: &EstimateArgs) -> Result<String> {
    let target = required(&a.target, "target")?;
    let n = required(&a.n, "n")?;
    let eps = positive(a.eps.unwrap_or(1e-2), "eps")?;
    let levels = a.sweep.unwrap_or(5);
    if levels == 0 {
        return Err(invalid("--sweep must be at least 1"));
    }
    let spec = a.quad.spec()?;
    let jet_order = a.jet_order.unwrap_or(2);
    let grid = dyadic_grid(eps, levels);
    let (path, _) = resolve_output(a.output.out.as_ref(), a.output.format.as_deref(), "report.json", &[Format::Json])?;
    let family =
        a.family.clone().unwrap_or_else(|| if n <= 3 || target == "scal" { "gn".into() } else { "escobar".into() });
    let (reports, constants, geometry_name): (Vec<EstimatorReport>, Value, String) =
        match (family.as_str(), target.as_str()) {
            ("escobar", "H" | "mass" | "theta" | "ringII") => {
                let name = geometry_label(a.geometry.as_ref(), a.geometry_file.as_ref(), "umbilic");
                let profile = escobar_halfspace_optimizer(n)?;
                let radius = a.radius.unwrap_or(if target == "H" { 25.0 } else { 10.0 });
                let bubble = EscobarBubble::new(&profile, radius, &spec)?;
                let c = ObservabilityConstants::for_bubble(&bubble)?;
                let (data, metric) = boundary_metric(&name, a.geometry_file.as_ref(), n, jet_order, target == "H")?;
                let source = DeficitSource::Escobar { bubble: &bubble, metric: metric.as_dyn() };
                let reports = if target == "H" {
                    hat_h_sweep(&source, &grid, &c, Some(data.h()))?
                } else {
                    let truth = match &metric {
                        Metric::Jet(jet) => {
                            let s = bubble.escobar_series(jet, 3);
                            Some([data.h(), s.relative[2], s.relative[3]])
                        }
                        Metric::Exact(_) => None,
                    };
                    let [_, mass, theta] = three_scale_sweep(&source, &grid, &c, truth)?;
                    match target.as_str() {
                        "mass" => mass,
                        "theta" => theta,
                        _ => {
                            let w = ChannelWeights::for_bubble(&bubble)?;
                            let mut rings = mass
                                .iter()
                                .map(|m| {
                                    ring_ii_estimator(
                                        m,
                                        data.ric_normal,
                                        data.scal_boundary,
                                        &w,
                                        Some(data.ring_norm2()),
                                    )
                                })
                                .collect::<bubblelab::Result<Vec<_>>>()?;
                            attach_order(&mut rings);
                            rings
                        }
                    }
                };
                let snap = json!({ "observability": c, "escobar": escobar_constants_for(n, &spec)? });
                (reports, snap, name)
            }
            ("gn", "H") => {
                let name = geometry_label(a.geometry.as_ref(), a.geometry_file.as_ref(), "umbilic");
                let model = GnModel::build(n, a.p.unwrap_or(3.0), 0.05, a.radius.unwrap_or(20.0), &spec)?;
                let (data, metric) = boundary_metric(&name, a.geometry_file.as_ref(), n, jet_order, true)?;
                let mut reports = grid
                    .iter()
                    .map(|&e| gn_boundary_h_from_metric(&model, metric.as_dyn(), e, 2.0 * e, Some(data.h())))
                    .collect::<bubblelab::Result<Vec<_>>>()?;
                attach_order(&mut reports);
                (reports, snapshot("gn", &model.coefficients)?, name)
            }
            ("gn", "scal") => {
                let name = a.geometry.clone().unwrap_or_else(|| "round".into());
                let point = interior_point(&name, n)?;
                let model = GnModel::build(n, a.p.unwrap_or(3.0), 0.05, a.radius.unwrap_or(20.0), &spec)?;
                let mut reports = grid
                    .iter()
                    .map(|&e| gn_interior_scal_from_point(&model, &point, 1.0, e, 2.0 * e))
                    .collect::<bubblelab::Result<Vec<_>>>()?;
                attach_order(&mut reports);
                (reports, snapshot("gn", &model.coefficients)?, name)
            }
            (f, t) => return Err(invalid(format!("target '{t}' is not available for family '{f}'"))),
        };
    let finest = reports.last().context("empty sweep")?.clone();
    write_json(
        &path,
        &ctx.command,
        a,
        constants,
        json!({
            "target": target,
            "family": family,
            "geometry": geometry_name,
            "estimate": finest.estimate,
            "truth": finest.truth,
            "error": finest.error,
            "empirical_order": finest.empirical_order,
            "levels": reports,
        }),
    )?;
    Ok(format!(
        "estimate {target} ({family}, {geometry_name}, n={n}): finest {} truth {:?} order {:?} -> {}",
        finest.estimate,
        finest.truth,
        finest.empirical_order,
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// gauss-bonnet

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GaussBonnetArgs {
    /// disk or annulus.
    #[arg(long)]
    pub surface: Option<String>,
    /// exact or estimated.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub inner_radius: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Coarse scale of the estimator pair (ε/10, ε).
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

pub fn gauss_bonnet(ctx: &Ctx, a: &GaussBonnetArgs) -> Result<String> {
    let surface = Surface::parse(&required(&a.surface, "surface")?, a.inner_radius.unwrap_or(0.5))?;
    let mode = a.mode.clone().unwrap_or_else(|| "exact".into());
    let resolution = a.resolution.unwrap_or(32);
    if resolution < 2 {
        return Err(invalid("--resolution must be at least 2"));
    }
    let spec = a.quad.spec()?;
    let (path, _) =
        resolve_output(a.output.out.as_ref(), a.output.format.as_deref(), "gauss_bonnet.json", &[Format::Json])?;
    let (fields, constants, tol) = match mode.as_str() {
        "exact" => (exact_surface_fields(&surface, resolution)?, Value::Null, 1e-10),
        "estimated" => {
            let model = GnModel::build(2, 3.0, 0.05, 20.0, &spec)?;
            let eps = positive(a.eps.unwrap_or(1e-2), "eps")?;
            (estimated_surface_fields(&surface, resolution, &model, eps)?, snapshot("gn", &model.coefficients)?, 0.05)
        }
        other => return Err(invalid(format!("unknown mode '{other}' (exact or estimated)"))),
    };
    let report = gauss_bonnet_recovery(&fields)?;
    let chi = surface.euler_characteristic();
    let pass = (report.chi_hat - chi as f64).abs() <= tol;
    write_json(
        &path,
        &ctx.command,
        a,
        constants,
        json!({ "surface": surface, "mode": mode, "euler_characteristic": chi, "tolerance": tol, "within_tolerance": pass, "report": report }),
    )?;
    Ok(format!(
        "gauss-bonnet {mode}: chi_hat={} (chi={chi}, within {tol:e}: {pass}) -> {}",
        report.chi_hat,
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// reduce

/// Contents of a `--field` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FieldSpec {
    pub domain: Domain,
    /// Renormalized-mass field 𝔯.
    pub mass: Field,
    #[serde(default)]
    pub mean_curvature: Option<Field>,
    /// Smooth part of the interaction kernel, polynomial coefficients in d.
    #[serde(default)]
    pub kernel_smooth: Vec<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ReduceArgs {
    /// JSON field specification.
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Number of bubbles.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Base seed of the multi-start search.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Common scale for the scale-Jacobian report.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Singular kernel coefficient a_n (model units).
    #[arg(long)]
    pub a_n: Option<f64>,
    /// Interaction coefficient c_n^conf (model units).
    #[arg(long)]
    pub c_conf: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

pub fn reduce(ctx: &Ctx, a: &ReduceArgs) -> Result<String> {
    let field_path = required(&a.field, "field")?;
    let k = required(&a.k, "k")?;
    let n = required(&a.n, "n")?;
    let eps = positive(a.eps.unwrap_or(1e-3), "eps")?;
    let spec = a.quad.spec()?;
    let (path, _) = resolve_output(a.output.out.as_ref(), a.output.format.as_deref(), "crit.json", &[Format::Json])?;
    let text = std::fs::read_to_string(&field_path)
        .map_err(|e| invalid(format!("cannot read field {}: {e}", field_path.display())))?;
    let fs: FieldSpec =
        serde_json::from_str(&text).map_err(|e| invalid(format!("field {}: {e}", field_path.display())))?;
    let constants = escobar_constants_for(n, &spec)?;
    let options = SearchOptions { seeds: a.seeds.unwrap_or(64), seed: a.seed.unwrap_or(0), ..Default::default() };
    let search = critical_point_search(&fs.mass, fs.domain, k, &options)?;
    let mut kernel = InteractionKernel::new(n, a.a_n.unwrap_or(1.0))?;
    kernel.smooth = fs.kernel_smooth.clone();
    let mut model = ReducedModel::new(
        &constants,
        kernel,
        fs.mass.clone(),
        fs.mean_curvature.clone().unwrap_or(Field::Constant { value: 0.0 }),
    );
    model.c_conf = a.c_conf.unwrap_or(1.0);
    let diagnostics = search
        .critical_points
        .iter()
        .map(|p| -> Result<Value> {
            let config = Configuration::new(fs.domain, p.centers.clone(), vec![eps; k])?;
            if k == 1 {
                return Ok(json!({ "jacobian": scale_jacobian(&model, &config)?, "balance_residual": balance_law_residual(&model, &config)? }));
            }
            let separated = config.separation().min_distance > 0.0;
            Ok(if separated {
                json!({
                    "jacobian": scale_jacobian(&model, &config)?,
                    "balance_residual": balance_law_residual(&model, &config)?,
                    "separation": config.separation(),
                })
            } else {
                Value::Null
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let level = quantized_level(k, n, constants.s_star)?;
    let count = search.critical_points.len();
    write_json(
        &path,
        &ctx.command,
        a,
        snapshot("escobar", &constants)?,
        json!({
            "field": fs,
            "quantized_level": level,
            "search": search,
            "scale_diagnostics_eps": eps,
            "scale_diagnostics": diagnostics,
        }),
    )?;
    Ok(format!(
        "reduce k={k} n={n}: {count} critical configurations, level k^(1/(n-1)) S* = {level} -> {}",
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// dynamics

#[derive(Debug, Subcommand)]
pub enum DynamicsCommand {
    /// Entropy envelope of fast diffusion against the equality ODE.
    Fde(FdeArgs),
    /// First eigenvalue along a ladder of small windows.
    Window(WindowArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FdeArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<f64>,
    /// Initial entropy ∫u₀^{m+1}.
    #[arg(long = "E0")]
    #[serde(rename = "E0")]
    pub e0: Option<f64>,
    /// Initial mass ∫u₀.
    #[arg(long = "M0")]
    #[serde(rename = "M0")]
    pub m0: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// EEP constant C_{n,m}; the Euclidean-leading value is used when absent.
    #[arg(long)]
    pub eep_constant: Option<f64>,
    /// Pairing ∫u₀φ₁ for the extinction-time bound.
    #[arg(long)]
    pub y0: Option<f64>,
    /// First Dirichlet eigenvalue for the extinction-time bound.
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

pub fn dynamics_fde(ctx: &Ctx, a: &FdeArgs) -> Result<String> {
    let n = required(&a.n, "n")?;
    let m = required(&a.m, "m")?;
    let horizon = positive(a.horizon.unwrap_or(100.0), "horizon")?;
    let samples = a.samples.unwrap_or(201);
    let (path, fmt) =
        resolve_output(a.output.out.as_ref(), a.output.format.as_deref(), "fde.csv", &[Format::Csv, Format::Json])?;
    let eep = match a.eep_constant {
        Some(value) => EepConstant::Value { value },
        None => EepConstant::EuclideanLeading,
    };
    let params = DecayParams::new(n, m, eep, a.e0.unwrap_or(1.0), a.m0.unwrap_or(1.0))?;
    let check = ode_decay_check(&params, horizon, samples, &OdeOptions::default())?;
    let extinction = match (a.y0, a.lambda1) {
        (Some(y0), Some(l)) => {
            let bound = extinction_time_lower(y0, m, l)?;
            let witness = extinction_witness(y0, m, l, &OdeOptions::default())?;
            Some(json!({ "bound": bound, "ode_witness": witness, "relative_gap": ((witness - bound) / bound).abs() }))
        }
        (None, None) => None,
        _ => return Err(invalid("--y0 and --lambda1 must be given together")),
    };
    let constants = snapshot("decay", &params)?;
    let meta = json!({
        "sup_gap": check.sup_gap,
        "sup_excess": check.sup_excess,
        "half_closed_form_error": check.half_closed_form_error,
        "warnings": check.warnings,
        "extinction": extinction,
    });
    match fmt {
        Format::Csv => {
            let rows: Vec<Vec<String>> = check
                .times
                .iter()
                .zip(&check.ode)
                .zip(&check.envelope)
                .map(|((t, e), env)| float_row(&[*t, *e, *env, e - env]))
                .collect();
            write_csv(&path, &["t", "entropy_ode", "envelope", "gap"], &rows, &ctx.command, a, constants, meta)?;
        }
        Format::Json => write_json(&path, &ctx.command, a, constants, json!({ "check": check, "summary": meta }))?,
    }
    Ok(format!(
        "dynamics fde n={n} m={m}: alpha={} kappa={} sup|ode-envelope|={:e} -> {}",
        params.alpha,
        params.kappa,
        check.sup_gap,
        path.display()
    ))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct WindowArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Window radii "start:end", one rung per decade.
    #[arg(long)]
    pub ladder: Option<String>,
    /// Outer wall: neumann (closed-manifold model) or dirichlet.
    #[arg(long)]
    pub outer: Option<String>,
    /// GN exponent of the competitor bound.
    #[arg(long)]
    pub p: Option<f64>,
    /// Relative bisection tolerance on λ.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

pub fn dynamics_window(ctx: &Ctx, a: &WindowArgs) -> Result<String> {
    let n = required(&a.n, "n")?;
    let ladder = parse_ladder(a.ladder.as_deref().unwrap_or("1e-2:1e-5"))?;
    let outer = match a.outer.as_deref().unwrap_or("neumann") {
        "neumann" => OuterCondition::Neumann,
        "dirichlet" => OuterCondition::Dirichlet,
        other => return Err(invalid(format!("unknown outer condition '{other}'"))),
    };
    let p = a.p.unwrap_or(3.0);
    let tol = positive(a.tol.unwrap_or(1e-8), "tol")?;
    let (path, fmt) =
        resolve_output(a.output.out.as_ref(), a.output.format.as_deref(), "window.csv", &[Format::Csv, Format::Json])?;
    let report = small_window_lambda1(n, &ladder, outer, tol)?;
    let capacity =
        if outer == OuterCondition::Neumann { Some(capacity_blowup_bound(n, p, &ladder, tol)?) } else { None };
    let scaled_name = if n == 2 { "lambda1_times_abs_log_d" } else { "lambda1_over_d" };
    let constants = json!({ "gn_exponents": { "n": n, "p": p, "beta": capacity.as_ref().map(|c| c.beta) } });
    let meta = json!({
        "outer": outer,
        "last_relative_change": report.last_relative_change,
        "monotone": report.monotone,
        "capacity": capacity,
    });
    match fmt {
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .rungs
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    float_row(&[r.d, r.lambda1, r.scaled, capacity.as_ref().map_or(f64::NAN, |c| c.bound[i])])
                })
                .collect();
            write_csv(
                &path,
                &["d", "lambda1", scaled_name, "competitor_bound"],
                &rows,
                &ctx.command,
                a,
                constants,
                meta,
            )?;
        }
        Format::Json => write_json(&path, &ctx.command, a, constants, json!({ "report": report, "summary": meta }))?,
    }
    Ok(format!(
        "dynamics window n={n}: {} rungs, last relative change of {scaled_name} {} -> {}",
        report.rungs.len(),
        report.last_relative_change,
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// fixtures

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Recompute reference values at high resolution and store them.
    Regenerate(FixturesArgs),
    /// Recompute at standard resolution and compare with the stored values.
    Verify(FixturesArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FixturesArgs {
    /// Reference file; defaults to reference.json in the cache directory.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutArgs,
}

fn fixture_file(ctx: &Ctx, a: &FixturesArgs) -> PathBuf {
    a.file
        .clone()
        .unwrap_or_else(|| ctx.cache_dir.clone().unwrap_or_else(fixtures::default_dir).join(fixtures::FILE_NAME))
}

pub fn fixtures_regenerate(ctx: &Ctx, a: &FixturesArgs) -> Result<String> {
    let path = fixture_file(ctx, a);
    let date = chrono::Utc::now().format("%Y-%m-%d").to_string();
    let file = fixtures::regenerate(&QuadSpec::high(), &date)?;
    crate::output::write_atomic(&path, crate::output::to_json(&file)?.as_bytes())?;
    Ok(format!("fixtures regenerate: {} entries -> {}", file.entries.len(), path.display()))
}

/// Verification drift, reported with exit status 3.
#[derive(Debug)]
pub struct Drift(pub Vec<String>);

impl std::fmt::Display for Drift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "fixture drift beyond tolerance: {}", self.0.join(", "))
    }
}

impl std::error::Error for Drift {}

pub fn fixtures_verify(ctx: &Ctx, a: &FixturesArgs) -> Result<String> {
    let path = fixture_file(ctx, a);
    let text =
        std::fs::read_to_string(&path).map_err(|e| invalid(format!("cannot read fixtures {}: {e}", path.display())))?;
    let stored: fixtures::FixtureFile =
        serde_json::from_str(&text).map_err(|e| invalid(format!("fixtures {}: {e}", path.display())))?;
    let report = fixtures::verify(&stored, &QuadSpec::default())?;
    if let Some(out) = &a.output.out {
        write_json(out, &ctx.command, a, json!({ "fixture_quadrature": stored.quadrature }), &report)?;
    }
    if !report.pass {
        let mut failing: Vec<String> = report.failures().into_iter().map(String::from).collect();
        failing.extend(report.unexpected.iter().map(|u| format!("{u} (not in file)")));
        return Err(Drift(failing).into());
    }
    Ok(format!("fixtures verify: {} entries pass against {}", report.checks.len(), path.display()))
}
