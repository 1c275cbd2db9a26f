//! Energy-only inverse estimators: mean curvature, renormalized mass, and the
//! third-order coefficient from Escobar deficits; mean and scalar curvature from
//! GN deficits; Euler characteristic of surfaces from the recovered fields.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{deficit_series, DeficitPoint, DeficitSource, EscobarBubble, GnModel};
use crate::error::{invalid, Error, Result};
use crate::fit::loglog_slope;
use crate::geometry::{fermi_jet, ChartMetric, ExactBall, InteriorPointData, ModelGeometry};
use crate::moments::{EscobarConstants, GnCoefficients};
use crate::quadrature::GaussLegendre;

/// One estimate with optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub target: String,
    pub estimate: f64,
    pub truth: Option<f64>,
    pub error: Option<f64>,
    pub epsilons: Vec<f64>,
    pub empirical_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EstimatorReport {
    pub fn new(target: &str, estimate: f64, truth: Option<f64>, epsilons: Vec<f64>) -> Self {
        Self {
            target: target.to_string(),
            estimate,
            truth,
            error: truth.map(|t| (estimate - t).abs()),
            epsilons,
            empirical_order: None,
            warnings: Vec::new(),
        }
    }
}

/// Normalization of Escobar deficits: E/S* = ρ H ε + 𝔯 ε² + Θ ε³ + …
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityConstants {
    pub n: usize,
    pub s_star: f64,
    pub rho: f64,
}

impl ObservabilityConstants {
    /// Untruncated constants S* and ρₙ^conf.
    pub fn from_constants(c: &EscobarConstants) -> Self {
        Self { n: c.n, s_star: c.s_star, rho: c.rho_conf }
    }

    /// Constants of a fixed-cutoff bubble: its flat quotient S*(R) and the exact
    /// first-order coefficient ρ_R on its own quadrature nodes.
    pub fn for_bubble(bubble: &EscobarBubble) -> Result<Self> {
        let data = ModelGeometry::UmbilicSphereCap { mean_curvature: 1.0 }.boundary_data(bubble.n)?;
        let jet = fermi_jet(&data, 2)?.averaged();
        let s = bubble.escobar_series(&jet, 1);
        Ok(Self { n: bubble.n, s_star: bubble.flat_escobar(), rho: s.relative[1] })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("scale must be positive, got {eps}")));
    }
    Ok(())
}

/// Ĥ = E(ε)/(S* ρ ε).
pub fn hat_h_single(point: &DeficitPoint, c: &ObservabilityConstants, truth: Option<f64>) -> Result<EstimatorReport> {
    check_eps(point.epsilon)?;
    let est = point.deficit / (c.s_star * c.rho * point.epsilon);
    Ok(EstimatorReport::new("H", est, truth, vec![point.epsilon]))
}

/// Three-scale de-biasing from deficits at (ε, 2ε, 3ε). Returns reports for
/// (Ĥ, 𝔯̂, Θ̂) in that order; `truth` lists (H, 𝔯, Θ) in the same normalization.
pub fn three_scale_debias(
    points: &[DeficitPoint; 3],
    c: &ObservabilityConstants,
    truth: Option<[f64; 3]>,
) -> Result<[EstimatorReport; 3]> {
    let eps = points[0].epsilon;
    check_eps(eps)?;
    for (k, p) in points.iter().enumerate() {
        let want = (k + 1) as f64 * eps;
        if ((p.epsilon - want) / want).abs() > 1e-12 {
            return Err(invalid(format!(
                "scale triple must be (ε, 2ε, 3ε); entry {k} is {} instead of {want}",
                p.epsilon
            )));
        }
    }
    let s = c.s_star;
    let a: Vec<f64> = points.iter().enumerate().map(|(k, p)| p.deficit / ((k + 1) as f64 * eps)).collect();
    let d1 = a[1] - a[0];
    let d2 = a[2] - a[1];
    let theta = (d2 - d1) / (2.0 * s * eps * eps);
    let mass = d1 / (s * eps) - 3.0 * eps * theta;
    let h = (a[0] / s - eps * mass - eps * eps * theta) / c.rho;
    let scales = vec![eps, 2.0 * eps, 3.0 * eps];
    let mut out = [
        EstimatorReport::new("H", h, truth.map(|t| t[0]), scales.clone()),
        EstimatorReport::new("mass", mass, truth.map(|t| t[1]), scales.clone()),
        EstimatorReport::new("theta", theta, truth.map(|t| t[2]), scales),
    ];
    if c.n < 7 {
        for r in &mut out {
            r.warnings.push(format!("stated rates assume n >= 7, got n = {}", c.n));
        }
    }
    Ok(out)
}

/// Output of the two-point modulated estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulatedEstimate {
    /// Δ(ε)/ε.
    pub m: f64,
    /// (Δ(2ε) - 2Δ(ε))/ε².
    pub n: f64,
    /// M - εN/2, estimating ρH.
    pub rho_h: EstimatorReport,
    /// N/2, estimating 𝔯.
    pub mass: EstimatorReport,
}

/// Two-point estimator from deficits at (ε, 2ε) normalized by S*.
pub fn modulated_two_point(
    points: &[DeficitPoint; 2],
    c: &ObservabilityConstants,
    truth: Option<[f64; 2]>,
) -> Result<ModulatedEstimate> {
    let eps = points[0].epsilon;
    check_eps(eps)?;
    if ((points[1].epsilon - 2.0 * eps) / eps).abs() > 1e-12 {
        return Err(invalid("scale pair must be (ε, 2ε)"));
    }
    let d1 = points[0].deficit / c.s_star;
    let d2 = points[1].deficit / c.s_star;
    let m = d1 / eps;
    let n = (d2 - 2.0 * d1) / (eps * eps);
    let scales = vec![eps, 2.0 * eps];
    Ok(ModulatedEstimate {
        m,
        n,
        rho_h: EstimatorReport::new("rho_H", m - 0.5 * eps * n, truth.map(|t| t[0]), scales.clone()),
        mass: EstimatorReport::new("mass", 0.5 * n, truth.map(|t| t[1]), scales),
    })
}

/// Weights of the renormalized mass 𝔯 = κ₁ Ric(ν,ν) + κ₂ Scal_∂ + κ₃ |II̊|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelWeights {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

impl ChannelWeights {
    /// Weights stored in the constants; κ₃ prefers the fitted effective value.
    pub fn from_constants(c: &EscobarConstants) -> Result<Self> {
        let missing = |what: &str| Error::UnfitChannelConstants(format!("{what} is not available for n = {}", c.n));
        Ok(Self {
            kappa1: c.kappa1.ok_or_else(|| missing("kappa1"))?,
            kappa2: c.kappa2.ok_or_else(|| missing("kappa2"))?,
            kappa3: c.kappa3_effective.or(c.kappa3).ok_or_else(|| missing("kappa3"))?,
        })
    }

    /// Exact ε² coefficients of the channel-isolating jets for a fixed-cutoff
    /// bubble, in units of E/S*.
    pub fn for_bubble(bubble: &EscobarBubble) -> Result<Self> {
        let n = bubble.n;
        let c2 = |g: ModelGeometry| -> Result<f64> {
            let jet = fermi_jet(&g.boundary_data(n)?, 2)?.averaged();
            Ok(bubble.escobar_series(&jet, 2).relative[2])
        };
        Ok(Self {
            kappa1: c2(ModelGeometry::RicciOnly { ric_normal: 1.0 })?,
            kappa2: c2(ModelGeometry::BoundaryScalOnly { scal_boundary: 1.0 })?,
            kappa3: c2(ModelGeometry::AnisotropicCylinderLike { amplitude: std::f64::consts::FRAC_1_SQRT_2 })?,
        })
    }
}

/// |II̊|² estimate (𝔯̂ - κ₁Ric(ν,ν) - κ₂Scal_∂)/κ₃.
pub fn ring_ii_estimator(
    mass: &EstimatorReport,
    ric_normal: f64,
    scal_boundary: f64,
    weights: &ChannelWeights,
    truth: Option<f64>,
) -> Result<EstimatorReport> {
    if weights.kappa3.abs() < 1e-14 {
        return Err(Error::UnfitChannelConstants("the |II̊|² weight vanishes".into()));
    }
    let est = (mass.estimate - weights.kappa1 * ric_normal - weights.kappa2 * scal_boundary) / weights.kappa3;
    Ok(EstimatorReport::new("ring_II", est, truth, mass.epsilons.clone()))
}

/// GN deficit point (ε, C* - W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnDeficit {
    pub epsilon: f64,
    pub deficit: f64,
}

fn check_gn_pair(a: &GnDeficit, b: &GnDeficit) -> Result<()> {
    check_eps(a.epsilon)?;
    check_eps(b.epsilon)?;
    if a.epsilon == b.epsilon {
        return Err(invalid("the two GN scales must differ"));
    }
    Ok(())
}

/// Ĥ = (Δ(ε₁) - Δ(ε₂))/(κ^bdy (ε₁ - ε₂)).
pub fn gn_boundary_h(
    d1: &GnDeficit,
    d2: &GnDeficit,
    c: &GnCoefficients,
    truth: Option<f64>,
) -> Result<EstimatorReport> {
    check_gn_pair(d1, d2)?;
    if c.kappa_bdy_deficit == 0.0 {
        return Err(invalid("boundary GN coefficient vanishes"));
    }
    let est = (d1.deficit - d2.deficit) / (c.kappa_bdy_deficit * (d1.epsilon - d2.epsilon));
    Ok(EstimatorReport::new("H", est, truth, vec![d1.epsilon, d2.epsilon]))
}

/// Scal-hat = (Δ(ε₁) - Δ(ε₂))/(κ^int (ε₁² - ε₂²)).
pub fn gn_interior_scal(
    d1: &GnDeficit,
    d2: &GnDeficit,
    c: &GnCoefficients,
    truth: Option<f64>,
) -> Result<EstimatorReport> {
    check_gn_pair(d1, d2)?;
    if c.kappa_int_deficit == 0.0 {
        return Err(invalid("interior GN coefficient vanishes"));
    }
    let den = c.kappa_int_deficit * (d1.epsilon * d1.epsilon - d2.epsilon * d2.epsilon);
    Ok(EstimatorReport::new("scal", (d1.deficit - d2.deficit) / den, truth, vec![d1.epsilon, d2.epsilon]))
}

/// Least-squares slope of log error against log ε over the three finest levels.
pub fn empirical_order(eps: &[f64], errors: &[f64]) -> Result<f64> {
    let mut pairs: Vec<(f64, f64)> = eps.iter().copied().zip(errors.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(3);
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    loglog_slope(&x, &y)
}

fn attach_order(reports: &mut [EstimatorReport]) {
    let eps: Vec<f64> = reports.iter().map(|r| r.epsilons[0]).collect();
    let errs: Option<Vec<f64>> = reports.iter().map(|r| r.error).collect();
    if let Some(errs) = errs {
        if let Ok(order) = empirical_order(&eps, &errs) {
            for r in reports.iter_mut() {
                r.empirical_order = Some(order);
            }
        }
    }
}

/// Single-scale Ĥ over a grid, with the empirical order when truth is known.
pub fn hat_h_sweep(
    source: &DeficitSource<'_>,
    grid: &[f64],
    c: &ObservabilityConstants,
    truth: Option<f64>,
) -> Result<Vec<EstimatorReport>> {
    let points = deficit_series(source, grid)?;
    let mut out = points.iter().map(|p| hat_h_single(p, c, truth)).collect::<Result<Vec<_>>>()?;
    attach_order(&mut out);
    Ok(out)
}

/// Three-scale estimates for every base scale of the grid. Entry k of the result
/// holds the sweep of target k (Ĥ, 𝔯̂, Θ̂).
pub fn three_scale_sweep(
    source: &DeficitSource<'_>,
    grid: &[f64],
    c: &ObservabilityConstants,
    truth: Option<[f64; 3]>,
) -> Result<[Vec<EstimatorReport>; 3]> {
    let mut out: [Vec<EstimatorReport>; 3] = Default::default();
    for &eps in grid {
        let pts = deficit_series(source, &[eps, 2.0 * eps, 3.0 * eps])?;
        let reports = three_scale_debias(&[pts[0], pts[1], pts[2]], c, truth)?;
        for (k, r) in reports.into_iter().enumerate() {
            out[k].push(r);
        }
    }
    for target in &mut out {
        attach_order(target);
    }
    Ok(out)
}

/// Modulated two-point estimates over a grid: (ρĤ sweep, 𝔯̂ sweep).
pub fn modulated_sweep(
    source: &DeficitSource<'_>,
    grid: &[f64],
    c: &ObservabilityConstants,
    truth: Option<[f64; 2]>,
) -> Result<[Vec<EstimatorReport>; 2]> {
    let mut out: [Vec<EstimatorReport>; 2] = Default::default();
    for &eps in grid {
        let pts = deficit_series(source, &[eps, 2.0 * eps])?;
        let m = modulated_two_point(&[pts[0], pts[1]], c, truth)?;
        out[0].push(m.rho_h);
        out[1].push(m.mass);
    }
    for target in &mut out {
        attach_order(target);
    }
    Ok(out)
}

/// GN boundary Ĥ from bubbles at (ε₁, ε₂) over a chart metric.
pub fn gn_boundary_h_from_metric(
    model: &GnModel,
    metric: &dyn ChartMetric,
    eps1: f64,
    eps2: f64,
    truth: Option<f64>,
) -> Result<EstimatorReport> {
    let d = |eps: f64| -> Result<GnDeficit> {
        let r = model.bubble.boundary_quotient(metric, eps)?;
        Ok(GnDeficit { epsilon: eps, deficit: -r.deficit })
    };
    gn_boundary_h(&d(eps1)?, &d(eps2)?, &model.coefficients, truth)
}

/// GN interior Scal-hat from bubbles at (ε₁, ε₂) over a normal-coordinate jet.
pub fn gn_interior_scal_from_point(
    model: &GnModel,
    point: &InteriorPointData,
    chart_radius: f64,
    eps1: f64,
    eps2: f64,
) -> Result<EstimatorReport> {
    let jet = point.jet(chart_radius)?;
    let d = |eps: f64| -> Result<GnDeficit> {
        let r = model.bubble.interior_quotient(&jet, eps)?;
        Ok(GnDeficit { epsilon: eps, deficit: -r.deficit })
    };
    gn_interior_scal(&d(eps1)?, &d(eps2)?, &model.coefficients, Some(point.scal()))
}

// ---------------------------------------------------------------------------
// Gauss–Bonnet

/// Flat model surfaces with boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Surface {
    Disk,
    Annulus { inner_radius: f64 },
}

impl Surface {
    pub fn parse(name: &str, inner_radius: f64) -> Result<Self> {
        match name {
            "disk" => Ok(Surface::Disk),
            "annulus" => Surface::Annulus { inner_radius }.validated(),
            other => Err(invalid(format!("unknown surface '{other}'"))),
        }
    }

    fn validated(self) -> Result<Self> {
        if let Surface::Annulus { inner_radius } = self {
            if !(inner_radius > 0.0 && inner_radius < 1.0) {
                return Err(invalid(format!("annulus inner radius must lie in (0, 1), got {inner_radius}")));
            }
        }
        Ok(self)
    }

    fn inner(&self) -> f64 {
        match self {
            Surface::Disk => 0.0,
            Surface::Annulus { inner_radius } => *inner_radius,
        }
    }

    pub fn euler_characteristic(&self) -> i32 {
        match self {
            Surface::Disk => 1,
            Surface::Annulus { .. } => 0,
        }
    }
}

/// Field value with its measure weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub weight: f64,
    pub value: f64,
}

/// Scalar curvature on an interior grid and mean curvature on a boundary grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFields {
    pub n: usize,
    pub interior: Vec<FieldSample>,
    pub boundary: Vec<FieldSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussBonnetReport {
    pub chi_hat: f64,
    pub nearest_integer: i64,
    pub distance: f64,
    pub interior_term: f64,
    pub boundary_term: f64,
}

/// χ̂ = (1/2π)(½ Σ Scal dA + Σ H ds).
pub fn gauss_bonnet_recovery(fields: &SurfaceFields) -> Result<GaussBonnetReport> {
    if fields.n != 2 {
        return Err(invalid(format!("Gauss–Bonnet recovery needs a surface, got n = {}", fields.n)));
    }
    let sum = |s: &[FieldSample]| s.iter().map(|f| f.weight * f.value).sum::<f64>();
    let interior_term = 0.5 * sum(&fields.interior);
    let boundary_term = sum(&fields.boundary);
    let chi_hat = (interior_term + boundary_term) / (2.0 * std::f64::consts::PI);
    let nearest = chi_hat.round();
    Ok(GaussBonnetReport {
        chi_hat,
        nearest_integer: nearest as i64,
        distance: (chi_hat - nearest).abs(),
        interior_term,
        boundary_term,
    })
}

/// Interior nodes (r, weight).
type InteriorGrid = Vec<(f64, f64)>;
/// Boundary nodes (radius, weight, mean curvature).
type BoundaryGrid = Vec<(f64, f64, f64)>;

/// Polar interior grid (Gauss–Legendre in r, uniform in θ) and uniform boundary grids.
fn surface_grid(surface: &Surface, resolution: usize) -> (InteriorGrid, BoundaryGrid) {
    let inner = surface.inner();
    let rule = GaussLegendre::new(resolution.max(2));
    let angles = 2 * resolution.max(2);
    let dtheta = 2.0 * std::f64::consts::PI / angles as f64;
    let mut interior = Vec::new();
    for (r, w) in rule.mapped(inner, 1.0) {
        for _ in 0..angles {
            interior.push((r, w * r * dtheta));
        }
    }
    let mut boundary = Vec::new();
    for (radius, h) in [(1.0, 1.0), (inner, if inner > 0.0 { -1.0 / inner } else { 0.0 })] {
        if radius > 0.0 {
            for _ in 0..angles {
                boundary.push((radius, 2.0 * std::f64::consts::PI * radius / angles as f64, h));
            }
        }
    }
    (interior, boundary)
}

/// Exact fields of the flat model: Scal = 0, H = 1 on the outer circle and
/// H = -1/r on the inner circle.
pub fn exact_surface_fields(surface: &Surface, resolution: usize) -> Result<SurfaceFields> {
    let surface = surface.validated()?;
    let (interior, boundary) = surface_grid(&surface, resolution);
    Ok(SurfaceFields {
        n: 2,
        interior: interior.into_iter().map(|(_, w)| FieldSample { weight: w, value: 0.0 }).collect(),
        boundary: boundary.into_iter().map(|(_, w, h)| FieldSample { weight: w, value: h }).collect(),
    })
}

/// Fields recovered from GN deficits at the scale pair (ε/10, ε). The flat models
/// are rotationally symmetric, so each boundary circle and the interior need one
/// estimator evaluation each; the value is then spread over the grid.
pub fn estimated_surface_fields(
    surface: &Surface,
    resolution: usize,
    model: &GnModel,
    eps: f64,
) -> Result<SurfaceFields> {
    let surface = surface.validated()?;
    if model.bubble.n != 2 {
        return Err(invalid("Gauss–Bonnet recovery needs a two-dimensional GN model"));
    }
    check_eps(eps)?;
    let inner = surface.inner();
    let width = 1.0 - inner;
    let reach = 2.0 * model.bubble.radius * eps;
    if reach > width {
        return Err(Error::ChartOverflow { reach, chart: width });
    }
    let mut circles = vec![(1.0, ExactBall { n: 2, radius: 1.0 })];
    if inner > 0.0 {
        circles.push((inner, ExactBall { n: 2, radius: -inner }));
    }
    let h_hat = circles
        .par_iter()
        .map(|(radius, metric)| {
            Ok((*radius, gn_boundary_h_from_metric(model, metric, eps / 10.0, eps, None)?.estimate))
        })
        .collect::<Result<Vec<_>>>()?;
    let inscribed = if inner > 0.0 { 0.5 * width } else { 1.0 };
    let eps_int = eps.min(inscribed / (2.0 * model.bubble.radius));
    let scal_hat =
        gn_interior_scal_from_point(model, &InteriorPointData::flat(2), inscribed, eps_int / 10.0, eps_int)?.estimate;
    let (interior, boundary) = surface_grid(&surface, resolution);
    Ok(SurfaceFields {
        n: 2,
        interior: interior.into_iter().map(|(_, w)| FieldSample { weight: w, value: scal_hat }).collect(),
        boundary: boundary
            .into_iter()
            .map(|(r, w, _)| {
                let h = h_hat.iter().find(|(radius, _)| *radius == r).map(|x| x.1).unwrap_or(0.0);
                FieldSample { weight: w, value: h }
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> ObservabilityConstants {
        ObservabilityConstants { n: 7, s_star: 4.479, rho: 25.0 / 24.0 }
    }

    #[test]
    fn single_scale_inverts_linear_deficit() {
        let c = consts();
        let p =
            DeficitPoint { epsilon: 1e-2, deficit: c.s_star * c.rho * 0.7 * 1e-2, relative: 0.0, error_estimate: 0.0 };
        let r = hat_h_single(&p, &c, Some(0.7)).unwrap();
        assert!(r.error.unwrap() < 1e-14);
    }

    #[test]
    fn three_scale_rejects_wrong_triple() {
        let c = consts();
        let p = |e: f64| DeficitPoint { epsilon: e, deficit: 0.0, relative: 0.0, error_estimate: 0.0 };
        assert!(three_scale_debias(&[p(1e-2), p(2e-2), p(4e-2)], &c, None).is_err());
    }

    #[test]
    fn exact_disk_and_annulus() {
        let d = gauss_bonnet_recovery(&exact_surface_fields(&Surface::Disk, 16).unwrap()).unwrap();
        assert!((d.chi_hat - 1.0).abs() < 1e-12);
        let a =
            gauss_bonnet_recovery(&exact_surface_fields(&Surface::Annulus { inner_radius: 0.3 }, 16).unwrap()).unwrap();
        assert!(a.chi_hat.abs() < 1e-12);
    }

    #[test]
    fn gauss_bonnet_rejects_non_surface() {
        let f = SurfaceFields { n: 3, interior: vec![], boundary: vec![] };
        assert!(gauss_bonnet_recovery(&f).is_err());
    }
}
