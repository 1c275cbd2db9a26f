//! Reduced multi-bubble model: interaction kernel, the truncated functional F_k,
//! the scale Jacobian, the center-only potential 𝒲_k and its critical points.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{renormalized_mass, BoundaryPointData};
use crate::moments::{trace_exponent, EscobarConstants};

/// Parameter domain of the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Unit circle, coordinate θ ∈ [0, 2π).
    Circle,
    /// Flat torus [0, 2π)², coordinates (x, y).
    Torus,
    /// Unit sphere, coordinates (θ, φ) with polar θ ∈ [0, π].
    Sphere,
}

fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w == TAU {
        0.0
    } else {
        w
    }
}

fn wrapped_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

fn sphere_point(x: &[f64]) -> [f64; 3] {
    let (st, ct) = x[0].sin_cos();
    let (sp, cp) = x[1].sin_cos();
    [st * cp, st * sp, ct]
}

impl Domain {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "circle" => Ok(Domain::Circle),
            "torus" => Ok(Domain::Torus),
            "sphere" => Ok(Domain::Sphere),
            other => Err(invalid(format!("unknown parameter domain '{other}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Circle => 1,
            Domain::Torus | Domain::Sphere => 2,
        }
    }

    /// Geodesic distance of the parametrized boundary.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Domain::Circle => wrapped_difference(x[0], y[0]).abs(),
            Domain::Torus => wrapped_difference(x[0], y[0]).hypot(wrapped_difference(x[1], y[1])),
            Domain::Sphere => {
                let (u, v) = (sphere_point(x), sphere_point(y));
                let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                let s = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
                let c = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                s.atan2(c)
            }
        }
    }

    /// Coordinate gradient of d(x, y) in x.
    pub fn distance_gradient(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match self {
            Domain::Circle => vec![wrapped_difference(x[0], y[0]).signum()],
            Domain::Torus => {
                let (dx, dy) = (wrapped_difference(x[0], y[0]), wrapped_difference(x[1], y[1]));
                let d = dx.hypot(dy);
                vec![dx / d, dy / d]
            }
            Domain::Sphere => {
                let h = 1e-7;
                (0..2)
                    .map(|k| {
                        let mut p = x.to_vec();
                        let mut m = x.to_vec();
                        p[k] += h;
                        m[k] -= h;
                        (self.distance(&p, y) - self.distance(&m, y)) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    /// Maps coordinates back into the fundamental domain.
    pub fn project(&self, x: &mut [f64]) {
        match self {
            Domain::Circle | Domain::Torus => x.iter_mut().for_each(|v| *v = wrap_angle(*v)),
            Domain::Sphere => {
                let mut t = x[0].rem_euclid(TAU);
                let mut p = x[1];
                if t > PI {
                    t = TAU - t;
                    p += PI;
                }
                x[0] = t;
                x[1] = wrap_angle(p);
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Domain::Circle => vec![rng.random_range(0.0..TAU)],
            Domain::Torus => vec![rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)],
            Domain::Sphere => {
                let u: f64 = rng.random_range(-1.0..1.0);
                vec![u.acos(), rng.random_range(0.0..TAU)]
            }
        }
    }
}

/// One term a·cos(m·x + φ) of a trigonometric field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub frequency: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

/// Scalar field on a parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Field {
    Constant {
        value: f64,
    },
    /// Σ a cos(m·x + φ).
    Trig {
        terms: Vec<TrigTerm>,
    },
    /// Periodic samples at θ_j = 2πj/N on the circle, cubic-convolution interpolation.
    Samples {
        values: Vec<f64>,
    },
}

/// Cubic-convolution kernel (a = -1/2) and its first two derivatives.
fn keys(s: f64) -> (f64, f64, f64) {
    let a = s.abs();
    let sg = s.signum();
    if a < 1.0 {
        (1.5 * a * a * a - 2.5 * a * a + 1.0, sg * (4.5 * a * a - 5.0 * a), 9.0 * a - 5.0)
    } else if a < 2.0 {
        (-0.5 * a * a * a + 2.5 * a * a - 4.0 * a + 2.0, sg * (-1.5 * a * a + 5.0 * a - 4.0), -3.0 * a + 5.0)
    } else {
        (0.0, 0.0, 0.0)
    }
}

impl Field {
    pub fn cos(frequency: f64) -> Self {
        Field::Trig { terms: vec![TrigTerm { amplitude: 1.0, frequency: vec![frequency], phase: 0.0 }] }
    }

    pub fn validate(&self, domain: Domain) -> Result<()> {
        match self {
            Field::Constant { value } if !value.is_finite() => Err(invalid("field constant must be finite")),
            Field::Trig { terms } => {
                for t in terms {
                    if t.frequency.len() != domain.dim() {
                        return Err(invalid(format!(
                            "trig term has {} frequencies, the domain has dimension {}",
                            t.frequency.len(),
                            domain.dim()
                        )));
                    }
                }
                Ok(())
            }
            Field::Samples { values } => {
                if domain != Domain::Circle {
                    return Err(invalid("sampled fields are supported on the circle only"));
                }
                if values.len() < 4 {
                    return Err(invalid("sampled fields need at least four samples"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn sample_stencil(values: &[f64], x: f64) -> [(f64, (f64, f64, f64)); 4] {
        let n = values.len();
        let h = TAU / n as f64;
        let u = wrap_angle(x) / h;
        let i0 = u.floor() as i64;
        let mut out = [(0.0, (0.0, 0.0, 0.0)); 4];
        for (slot, j) in (i0 - 1..=i0 + 2).enumerate() {
            let v = values[j.rem_euclid(n as i64) as usize];
            out[slot] = (v, keys(u - j as f64));
        }
        out
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Field::Constant { value } => *value,
            Field::Trig { terms } => terms
                .iter()
                .map(|t| t.amplitude * (t.frequency.iter().zip(x).map(|(m, v)| m * v).sum::<f64>() + t.phase).cos())
                .sum(),
            Field::Samples { values } => Self::sample_stencil(values, x[0]).iter().map(|(v, k)| v * k.0).sum(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Field::Constant { .. } => vec![0.0; x.len()],
            Field::Trig { terms } => {
                let mut g = vec![0.0; x.len()];
                for t in terms {
                    let s = (t.frequency.iter().zip(x).map(|(m, v)| m * v).sum::<f64>() + t.phase).sin();
                    for (gi, m) in g.iter_mut().zip(&t.frequency) {
                        *gi -= t.amplitude * m * s;
                    }
                }
                g
            }
            Field::Samples { values } => {
                let h = TAU / values.len() as f64;
                vec![Self::sample_stencil(values, x[0]).iter().map(|(v, k)| v * k.1).sum::<f64>() / h]
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let d = x.len();
        match self {
            Field::Constant { .. } => vec![vec![0.0; d]; d],
            Field::Trig { terms } => {
                let mut h = vec![vec![0.0; d]; d];
                for t in terms {
                    let c = (t.frequency.iter().zip(x).map(|(m, v)| m * v).sum::<f64>() + t.phase).cos();
                    for i in 0..d {
                        for j in 0..d {
                            h[i][j] -= t.amplitude * t.frequency[i] * t.frequency[j] * c;
                        }
                    }
                }
                h
            }
            Field::Samples { values } => {
                let step = TAU / values.len() as f64;
                vec![vec![Self::sample_stencil(values, x[0]).iter().map(|(v, k)| v * k.2).sum::<f64>() / (step * step)]]
            }
        }
    }

    /// True when the field has no x-dependence at all.
    pub fn is_constant(&self) -> bool {
        match self {
            Field::Constant { .. } => true,
            Field::Trig { terms } => terms.iter().all(|t| t.amplitude == 0.0 || t.frequency.iter().all(|m| *m == 0.0)),
            Field::Samples { values } => values.iter().all(|v| *v == values[0]),
        }
    }
}

/// Boundary interaction kernel 𝖦(d) = a_n·d^{2-n} (d^{-1} for n = 3) plus a smooth part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionKernel {
    pub n: usize,
    /// Singular coefficient, model units.
    pub a_n: f64,
    /// Smooth part Σ_k c_k d^k.
    #[serde(default)]
    pub smooth: Vec<f64>,
}

impl InteractionKernel {
    pub fn new(n: usize, a_n: f64) -> Result<Self> {
        let k = Self { n, a_n, smooth: Vec::new() };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(invalid(format!("the interaction kernel needs n >= 3, got {}", self.n)));
        }
        if !(self.a_n > 0.0) {
            return Err(invalid(format!("singular coefficient must be positive, got {}", self.a_n)));
        }
        Ok(())
    }

    fn exponent(&self) -> i32 {
        if self.n == 3 {
            -1
        } else {
            2 - self.n as i32
        }
    }

    pub fn value(&self, d: f64) -> f64 {
        self.a_n * d.powi(self.exponent()) + self.smooth.iter().rev().fold(0.0, |acc, c| acc * d + c)
    }

    /// d𝖦/dd.
    pub fn derivative(&self, d: f64) -> f64 {
        let e = self.exponent();
        let smooth: f64 =
            self.smooth.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c * d.powi(k as i32 - 1)).sum();
        self.a_n * e as f64 * d.powi(e - 1) + smooth
    }
}

/// Centers and scales of a k-bubble configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Configuration {
    pub domain: Domain,
    pub centers: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
}

/// Separation diagnostics of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub min_distance: f64,
    /// min d(xᵢ, xⱼ)/(εᵢ + εⱼ).
    pub min_ratio: f64,
}

impl Configuration {
    pub fn new(domain: Domain, centers: Vec<Vec<f64>>, scales: Vec<f64>) -> Result<Self> {
        let c = Self { domain, centers, scales };
        c.validate()?;
        Ok(c)
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(invalid("a configuration needs at least one center"));
        }
        if self.centers.len() != self.scales.len() {
            return Err(invalid("every center needs exactly one scale"));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(invalid(format!("scales must be positive, got {s}")));
        }
        if let Some(c) = self.centers.iter().find(|c| c.len() != self.domain.dim()) {
            return Err(invalid(format!("center {c:?} does not match domain dimension {}", self.domain.dim())));
        }
        Ok(())
    }

    pub fn separation(&self) -> Separation {
        let mut s = Separation { min_distance: f64::INFINITY, min_ratio: f64::INFINITY };
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                let d = self.domain.distance(&self.centers[i], &self.centers[j]);
                s.min_distance = s.min_distance.min(d);
                s.min_ratio = s.min_ratio.min(d / (self.scales[i] + self.scales[j]));
            }
        }
        s
    }

    fn pair_distance(&self, i: usize, j: usize) -> Result<f64> {
        let d = self.domain.distance(&self.centers[i], &self.centers[j]);
        if d == 0.0 {
            return Err(Error::Collision { i, j });
        }
        Ok(d)
    }
}

/// Constants and fields of the reduced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedModel {
    pub n: usize,
    pub s_star: f64,
    pub rho: f64,
    /// Interaction coefficient c_n^conf, model units.
    pub c_conf: f64,
    pub kernel: InteractionKernel,
    /// Renormalized-mass field 𝔯.
    pub mass: Field,
    /// Mean-curvature field H.
    pub mean_curvature: Field,
    /// Separation Λ below which a warning is attached.
    pub separation_threshold: f64,
}

impl ReducedModel {
    pub fn new(constants: &EscobarConstants, kernel: InteractionKernel, mass: Field, mean_curvature: Field) -> Self {
        Self {
            n: constants.n,
            s_star: constants.s_star,
            rho: constants.rho_conf,
            c_conf: constants.c_conf,
            kernel,
            mass,
            mean_curvature,
            separation_threshold: 1.0,
        }
    }

    fn check(&self, config: &Configuration) -> Result<()> {
        config.validate()?;
        self.kernel.validate()?;
        if self.kernel.n != self.n {
            return Err(invalid("kernel dimension differs from model dimension"));
        }
        self.mass.validate(config.domain)?;
        self.mean_curvature.validate(config.domain)
    }

    fn half(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }
}

/// 𝒲_k = Σ 𝔯(xᵢ).
pub fn center_potential(field: &Field, centers: &[Vec<f64>]) -> f64 {
    centers.iter().map(|x| field.value(x)).sum()
}

/// 𝒲_k from boundary data at each center through the channel decomposition.
pub fn center_potential_from_data(data: &[BoundaryPointData], constants: &EscobarConstants) -> Result<f64> {
    data.iter().map(|d| renormalized_mass(d, constants).map(|c| c.total)).sum()
}

/// Value of F_k split into its pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedValue {
    pub value: f64,
    pub k: usize,
    pub first_order: f64,
    pub second_order: f64,
    pub interaction: f64,
    pub separation: Separation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// F_k = k + (n-1)Σ(ρH(xᵢ)εᵢ + εᵢ²𝔯(xᵢ)) + (n-1)Σ_{i≠j} c (εᵢεⱼ)^{(n-2)/2} 𝖦(xᵢ, xⱼ).
pub fn reduced_functional(model: &ReducedModel, config: &Configuration) -> Result<ReducedValue> {
    model.check(config)?;
    let nf = model.n as f64;
    let k = config.k();
    let mut first = 0.0;
    let mut second = 0.0;
    for (x, e) in config.centers.iter().zip(&config.scales) {
        first += model.rho * model.mean_curvature.value(x) * e;
        second += e * e * model.mass.value(x);
    }
    let interaction = interaction_block(model, config)?;
    let separation = config.separation();
    let mut warnings = Vec::new();
    if separation.min_ratio < model.separation_threshold {
        warnings.push(format!(
            "separation ratio {} is below the threshold {}",
            separation.min_ratio, model.separation_threshold
        ));
    }
    Ok(ReducedValue {
        value: k as f64 + (nf - 1.0) * (first + second) + interaction,
        k,
        first_order: (nf - 1.0) * first,
        second_order: (nf - 1.0) * second,
        interaction,
        separation,
        warnings,
    })
}

/// (n-1)Σ_{i≠j} c (εᵢεⱼ)^{(n-2)/2} 𝖦(xᵢ, xⱼ), counting ordered pairs.
pub fn interaction_block(model: &ReducedModel, config: &Configuration) -> Result<f64> {
    let a = model.half();
    let mut sum = 0.0;
    for i in 0..config.k() {
        for j in i + 1..config.k() {
            let d = config.pair_distance(i, j)?;
            sum += 2.0 * (config.scales[i] * config.scales[j]).powf(a) * model.kernel.value(d);
        }
    }
    Ok((model.n as f64 - 1.0) * model.c_conf * sum)
}

/// Scale equations ℱᵢ = S* k^{-2/q}/(n-1) · ∂F_k/∂εᵢ.
pub fn scale_gradient(model: &ReducedModel, config: &Configuration) -> Result<Vec<f64>> {
    model.check(config)?;
    let k = config.k();
    let a = model.half();
    let norm = model.s_star * (k as f64).powf(-2.0 / trace_exponent(model.n));
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let ei = config.scales[i];
        let x = &config.centers[i];
        let mut g = model.rho * model.mean_curvature.value(x) + 2.0 * ei * model.mass.value(x);
        for j in (0..k).filter(|&j| j != i) {
            let d = config.pair_distance(i, j)?;
            g += 2.0 * model.c_conf * a * ei.powf(a - 1.0) * config.scales[j].powf(a) * model.kernel.value(d);
        }
        out.push(norm * g);
    }
    Ok(out)
}

/// Scale Jacobian with its Gershgorin summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleJacobian {
    pub matrix: Vec<Vec<f64>>,
    pub diagonal: Vec<f64>,
    /// Σ_{j≠i} |J_ij| per row.
    pub radii: Vec<f64>,
    pub diagonally_dominant: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Analytic Jacobian ∂ℱᵢ/∂εⱼ of the scale equations.
pub fn scale_jacobian(model: &ReducedModel, config: &Configuration) -> Result<ScaleJacobian> {
    model.check(config)?;
    let k = config.k();
    let a = model.half();
    let norm = model.s_star * (k as f64).powf(-2.0 / trace_exponent(model.n));
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        let ei = config.scales[i];
        m[i][i] = 2.0 * model.mass.value(&config.centers[i]);
        for j in (0..k).filter(|&j| j != i) {
            let ej = config.scales[j];
            let g = model.kernel.value(config.pair_distance(i, j)?);
            let c = 2.0 * model.c_conf * g;
            if a != 1.0 {
                m[i][i] += c * a * (a - 1.0) * ei.powf(a - 2.0) * ej.powf(a);
            }
            m[i][j] = c * a * a * ei.powf(a - 1.0) * ej.powf(a - 1.0);
        }
    }
    for row in &mut m {
        row.iter_mut().for_each(|v| *v *= norm);
    }
    let diagonal: Vec<f64> = (0..k).map(|i| m[i][i]).collect();
    let radii: Vec<f64> = (0..k).map(|i| (0..k).filter(|&j| j != i).map(|j| m[i][j].abs()).sum()).collect();
    let dominant = diagonal.iter().zip(&radii).all(|(d, r)| d.abs() > *r);
    let mut warnings = Vec::new();
    if config.centers.iter().any(|x| model.mean_curvature.value(x) != 0.0) {
        warnings.push("mean curvature is nonzero at a center; the diagonal structure assumes H = 0".into());
    }
    Ok(ScaleJacobian { matrix: m, diagonal, radii, diagonally_dominant: dominant, warnings })
}

/// k^{1/(n-1)} S*.
pub fn quantized_level(k: usize, n: usize, s_star: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("the bubble count must be at least one"));
    }
    if n < 3 {
        return Err(invalid(format!("quantized levels need n >= 3, got {n}")));
    }
    Ok((k as f64).powf(1.0 / (n as f64 - 1.0)) * s_star)
}

/// ρ∇H(xᵢ) + 2c Σ_{j≠i} εᵢ^{a-1}εⱼ^a ∇₁𝖦(xᵢ, xⱼ), a = (n-2)/2, per center.
pub fn balance_law_residual(model: &ReducedModel, config: &Configuration) -> Result<Vec<Vec<f64>>> {
    model.check(config)?;
    let a = model.half();
    let k = config.k();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let x = &config.centers[i];
        let mut r: Vec<f64> = model.mean_curvature.gradient(x).into_iter().map(|g| model.rho * g).collect();
        for j in (0..k).filter(|&j| j != i) {
            let d = config.pair_distance(i, j)?;
            let dg = model.kernel.derivative(d);
            let w = 2.0 * model.c_conf * config.scales[i].powf(a - 1.0) * config.scales[j].powf(a);
            for (ri, gd) in r.iter_mut().zip(config.domain.distance_gradient(x, &config.centers[j])) {
                *ri += w * dg * gd;
            }
        }
        out.push(r);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Critical points of 𝒲_k

/// Options of the multi-start Newton search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchOptions {
    pub seeds: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Configurations with a pair closer than this are discarded.
    pub collision_band: f64,
    /// Barrier weights μ applied in turn before the final unbarriered polish.
    pub barrier_schedule: [f64; 2],
    pub merge_tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            seeds: 64,
            seed: 0,
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            collision_band: 0.05,
            barrier_schedule: [1e-2, 1e-4],
            merge_tolerance: 1e-6,
        }
    }
}

/// A converged critical configuration of 𝒲_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalConfiguration {
    pub centers: Vec<Vec<f64>>,
    pub value: f64,
    pub gradient_norm: f64,
    pub hessian_eigenvalues: Vec<f64>,
    /// Number of negative Hessian eigenvalues.
    pub index: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub k: usize,
    pub domain: Domain,
    pub critical_points: Vec<CriticalConfiguration>,
    /// Every seed converged onto a degenerate critical set (for example a constant field).
    pub degenerate_manifold: bool,
    pub seeds_converged: usize,
    pub seeds_failed: usize,
    /// Smallest gradient norm reached by a failed seed.
    pub best_failed_gradient: Option<f64>,
}

struct Potential<'a> {
    field: &'a Field,
    domain: Domain,
    k: usize,
    mu: f64,
}

impl Potential<'_> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn split(&self, x: &[f64]) -> Vec<Vec<f64>> {
        x.chunks(self.dim()).map(|c| c.to_vec()).collect()
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        let centers = self.split(x);
        let mut g = DVector::zeros(x.len());
        for (i, c) in centers.iter().enumerate() {
            for (s, v) in self.field.gradient(c).into_iter().enumerate() {
                g[i * d + s] += v;
            }
        }
        if self.mu > 0.0 {
            for i in 0..self.k {
                for j in (0..self.k).filter(|&j| j != i) {
                    let dist = self.domain.distance(&centers[i], &centers[j]).max(1e-300);
                    for (s, v) in self.domain.distance_gradient(&centers[i], &centers[j]).into_iter().enumerate() {
                        g[i * d + s] -= self.mu * v / dist;
                    }
                }
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let m = x.len();
        let d = self.dim();
        let mut h = DMatrix::zeros(m, m);
        for (i, c) in self.split(x).iter().enumerate() {
            let hc = self.field.hessian(c);
            for a in 0..d {
                for b in 0..d {
                    h[(i * d + a, i * d + b)] = hc[a][b];
                }
            }
        }
        if self.mu > 0.0 {
            let barrier = Potential { field: &Field::Constant { value: 0.0 }, ..*self };
            let step = 1e-6;
            for col in 0..m {
                let mut p = x.to_vec();
                let mut q = x.to_vec();
                p[col] += step;
                q[col] -= step;
                let diff = (barrier.gradient(&p) - barrier.gradient(&q)) / (2.0 * step);
                for row in 0..m {
                    h[(row, col)] += diff[row];
                }
            }
            h = (&h + h.transpose()) * 0.5;
        }
        h
    }

    fn newton(&self, x: &mut Vec<f64>, max_iter: usize, tol: f64) -> f64 {
        let d = self.dim();
        let mut g = self.gradient(x);
        for _ in 0..max_iter {
            let gn = g.norm();
            if gn <= tol {
                return gn;
            }
            let h = self.hessian(x);
            let svd = h.svd(true, true);
            let Ok(step) = svd.solve(&(-&g), 1e-12) else { return gn };
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-6 {
                let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
                for c in trial.chunks_mut(d) {
                    self.domain.project(c);
                }
                let gt = self.gradient(&trial);
                if gt.norm() < (1.0 - 1e-4 * t) * gn {
                    *x = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return gn;
            }
        }
        g.norm()
    }
}

fn same_configuration(domain: Domain, a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    fn search(domain: Domain, a: &[Vec<f64>], b: &[Vec<f64>], used: &mut Vec<bool>, i: usize, tol: f64) -> bool {
        if i == a.len() {
            return true;
        }
        for j in 0..b.len() {
            if !used[j] && domain.distance(&a[i], &b[j]) <= tol {
                used[j] = true;
                if search(domain, a, b, used, i + 1, tol) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    a.len() == b.len() && search(domain, a, b, &mut vec![false; b.len()], 0, tol)
}

fn canonical(domain: Domain, mut centers: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for c in &mut centers {
        domain.project(c);
        for v in c.iter_mut() {
            if (TAU - *v).abs() < 1e-9 {
                *v = 0.0;
            }
        }
    }
    centers.sort_by(|x, y| {
        x.iter().zip(y).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    centers
}

/// Multi-start Newton search for critical points of 𝒲_k = Σ 𝔯(xᵢ) with a
/// logarithmic barrier on pairwise distances, followed by an unbarriered polish.
pub fn critical_point_search(field: &Field, domain: Domain, k: usize, options: &SearchOptions) -> Result<SearchReport> {
    field.validate(domain)?;
    if k == 0 {
        return Err(invalid("the bubble count must be at least one"));
    }
    if options.seeds == 0 {
        return Err(invalid("the search needs at least one seed"));
    }
    let d = domain.dim();
    let runs: Vec<(Vec<f64>, f64)> = (0..options.seeds)
        .into_par_iter()
        .map(|s| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(options.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(s as u64));
            let mut x: Vec<f64> = (0..k).flat_map(|_| domain.sample(&mut rng)).collect();
            if k > 1 {
                for &mu in &options.barrier_schedule {
                    Potential { field, domain, k, mu }.newton(
                        &mut x,
                        options.max_iterations,
                        options.gradient_tolerance * 1e-2,
                    );
                }
            }
            let gn = Potential { field, domain, k, mu: 0.0 }.newton(
                &mut x,
                options.max_iterations,
                options.gradient_tolerance,
            );
            (x, gn)
        })
        .collect();
    let plain = Potential { field, domain, k, mu: 0.0 };
    let mut points: Vec<CriticalConfiguration> = Vec::new();
    let mut converged = 0;
    let mut failed = 0;
    let mut best_failed: Option<f64> = None;
    let mut all_degenerate = true;
    for (x, gn) in runs {
        let centers = canonical(domain, x.chunks(d).map(|c| c.to_vec()).collect());
        let min_sep = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .map(|(i, j)| domain.distance(&centers[i], &centers[j]))
            .fold(f64::INFINITY, f64::min);
        if gn > options.gradient_tolerance || min_sep < options.collision_band {
            failed += 1;
            best_failed = Some(best_failed.map_or(gn, |b: f64| b.min(gn)));
            continue;
        }
        converged += 1;
        let flat: Vec<f64> = centers.iter().flatten().copied().collect();
        let eig = SymmetricEigen::new(plain.hessian(&flat)).eigenvalues;
        let mut eigs: Vec<f64> = eig.iter().copied().collect();
        eigs.sort_by(f64::total_cmp);
        let scale = eigs.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        let degenerate = eigs.iter().any(|e| e.abs() < 1e-8 * scale) || field.is_constant();
        all_degenerate &= degenerate;
        if points.iter().any(|p| same_configuration(domain, &p.centers, &centers, options.merge_tolerance)) {
            continue;
        }
        points.push(CriticalConfiguration {
            value: center_potential(field, &centers),
            gradient_norm: gn,
            index: eigs.iter().filter(|e| **e < -1e-8 * scale).count(),
            hessian_eigenvalues: eigs,
            degenerate,
            centers,
        });
    }
    points.sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.centers[0][0].total_cmp(&b.centers[0][0])));
    if converged == 0 {
        return Err(Error::NonConvergence(format!(
            "no seed converged; best gradient norm {}",
            best_failed.map_or("n/a".to_string(), |g| format!("{g:e}"))
        )));
    }
    Ok(SearchReport {
        k,
        domain,
        critical_points: points,
        degenerate_manifold: all_degenerate,
        seeds_converged: converged,
        seeds_failed: failed,
        best_failed_gradient: best_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_distance_wraps() {
        let d = Domain::Circle.distance(&[0.1], &[TAU - 0.1]);
        assert!((d - 0.2).abs() < 1e-14);
    }

    #[test]
    fn sphere_distance_of_antipodes() {
        let d = Domain::Sphere.distance(&[0.0, 0.0], &[PI, 0.0]);
        assert!((d - PI).abs() < 1e-14);
    }

    #[test]
    fn sampled_field_reproduces_nodes_and_cosine() {
        let n = 256;
        let values: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).cos()).collect();
        let f = Field::Samples { values };
        assert!((f.value(&[TAU * 3.0 / n as f64]) - (TAU * 3.0 / n as f64).cos()).abs() < 1e-14);
        assert!((f.value(&[1.0]) - 1f64.cos()).abs() < 1e-5);
        assert!((f.gradient(&[1.0])[0] + 1f64.sin()).abs() < 1e-3);
    }

    #[test]
    fn kernel_derivative_matches_difference() {
        let k = InteractionKernel { n: 5, a_n: 1.3, smooth: vec![0.2, -0.1, 0.05] };
        let h = 1e-6;
        let fd = (k.value(0.7 + h) - k.value(0.7 - h)) / (2.0 * h);
        assert!((fd - k.derivative(0.7)).abs() < 1e-6);
    }

    fn toy_model(n: usize, mass: Field) -> ReducedModel {
        ReducedModel {
            n,
            s_star: 3.0,
            rho: 0.4,
            c_conf: 1.0,
            kernel: InteractionKernel { n, a_n: 1.0, smooth: vec![0.1] },
            mass,
            mean_curvature: Field::Constant { value: 0.0 },
            separation_threshold: 1.0,
        }
    }

    #[test]
    fn cosine_on_circle_has_two_critical_points() {
        let r = critical_point_search(
            &Field::cos(1.0),
            Domain::Circle,
            1,
            &SearchOptions { seeds: 16, ..Default::default() },
        )
        .unwrap();
        assert_eq!(r.critical_points.len(), 2);
        let min = &r.critical_points[0];
        let max = &r.critical_points[1];
        assert!((min.centers[0][0] - PI).abs() < 1e-8 && min.index == 0);
        assert!(max.centers[0][0].abs() < 1e-8 && max.index == 1);
    }

    #[test]
    fn constant_field_is_degenerate() {
        let r = critical_point_search(
            &Field::Constant { value: 1.0 },
            Domain::Circle,
            2,
            &SearchOptions { seeds: 4, ..Default::default() },
        )
        .unwrap();
        assert!(r.degenerate_manifold);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for n in [4, 5, 7] {
            let m = toy_model(n, Field::cos(1.0));
            let c = Configuration::new(Domain::Circle, vec![vec![0.3], vec![2.0], vec![4.1]], vec![0.02, 0.03, 0.015])
                .unwrap();
            let j = scale_jacobian(&m, &c).unwrap();
            for col in 0..3 {
                let h = 1e-7;
                let mut p = c.clone();
                let mut q = c.clone();
                p.scales[col] += h;
                q.scales[col] -= h;
                let gp = scale_gradient(&m, &p).unwrap();
                let gq = scale_gradient(&m, &q).unwrap();
                for row in 0..3 {
                    let fd = (gp[row] - gq[row]) / (2.0 * h);
                    assert!(
                        (fd - j.matrix[row][col]).abs() < 1e-5 * (1.0 + fd.abs()),
                        "n={n} ({row},{col}) {fd} {}",
                        j.matrix[row][col]
                    );
                }
            }
        }
    }

    #[test]
    fn scale_gradient_matches_functional_derivative() {
        let m = toy_model(5, Field::cos(2.0));
        let c = Configuration::new(Domain::Circle, vec![vec![0.5], vec![3.0]], vec![0.01, 0.02]).unwrap();
        let g = scale_gradient(&m, &c).unwrap();
        let norm = m.s_star * 2f64.powf(-2.0 / trace_exponent(5)) / 4.0;
        for i in 0..2 {
            let h = 1e-7;
            let mut p = c.clone();
            let mut q = c.clone();
            p.scales[i] += h;
            q.scales[i] -= h;
            let fd =
                (reduced_functional(&m, &p).unwrap().value - reduced_functional(&m, &q).unwrap().value) / (2.0 * h);
            assert!((norm * fd - g[i]).abs() < 1e-6, "{} {}", norm * fd, g[i]);
        }
    }

    #[test]
    fn coincident_centers_are_a_collision() {
        let m = toy_model(5, Field::cos(1.0));
        let c = Configuration::new(Domain::Circle, vec![vec![1.0], vec![1.0]], vec![0.01, 0.01]).unwrap();
        assert!(matches!(reduced_functional(&m, &c), Err(Error::Collision { i: 0, j: 1 })));
    }

    #[test]
    fn eight_bubbles_in_four_dimensions_double_the_level() {
        let s = 2.7;
        assert!((quantized_level(8, 4, s).unwrap() - 2.0 * s).abs() < 1e-14);
    }
}
