//! Energy quotients of pushed-forward bubbles over Fermi jets and exact charts.
//!
//! A bubble at scale ε is evaluated in rescaled coordinates y = x/ε, so every
//! quotient becomes a weighted sum over the fixed node set of the profile with the
//! metric weights sampled at εy. Relative changes against the flat value are
//! formed from excess sums (weight minus one) through `ln_1p`/`expm1`, which keeps
//! full relative precision down to the smallest scales. Chunked sums are added
//! in a fixed order so results are reproducible bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_powers, series, PowerFit};
use crate::geometry::{fermi_jet, AveragedJet, ChartMetric, InteriorJet, ModelGeometry};
use crate::moments::{gn_coefficients, trace_exponent, EscobarConstants, GnCoefficients};
use crate::nodes::{gn_exponents, HalfspaceNodes, RadialNodes};
use crate::profiles::{gn_ground_state, gn_halfspace_near_optimizer_from, ProfileKind, RadialProfile};
use crate::quadrature::{par_sum, QuadSpec};
use crate::special::unit_sphere_area;

/// Which quotient a result belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    Escobar,
    PlainTrace,
    GnBoundary,
    GnInterior,
}

/// One quotient evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientResult {
    pub functional: Functional,
    pub epsilon: f64,
    pub radius: f64,
    pub amplitude: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub quotient: f64,
    /// Value of the same profile on the flat model.
    pub flat_quotient: f64,
    /// quotient / flat_quotient - 1, computed without cancellation.
    pub relative_change: f64,
    /// Reference constant the deficit is measured against.
    pub reference: f64,
    /// quotient - reference.
    pub deficit: f64,
    /// Named contributions to the numerator or to the GN integrals.
    pub terms: Vec<(String, f64)>,
    /// Change of the relative change under a doubled quadrature rule.
    pub error_estimate: f64,
}

fn check_chart(eps: f64, radius: f64, chart: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("scale must be positive, got {eps}")));
    }
    let reach = 2.0 * radius * eps;
    if reach > chart * (1.0 + 1e-12) {
        return Err(Error::ChartOverflow { reach, chart });
    }
    Ok(())
}

fn check_amplitude(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("amplitude must be positive, got {a}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Escobar and plain-trace quotients

#[derive(Debug, Clone, Copy, Default)]
struct EscobarSums {
    grad: f64,
    grad_excess: f64,
    mass: f64,
    boundary_l2: f64,
    trace_q: f64,
    trace_q_excess: f64,
    /// ∫ w √g, used by the mean-zero gauge.
    integral: f64,
}

fn escobar_sums(nodes: &HalfspaceNodes, metric: &dyn ChartMetric, eps: f64) -> EscobarSums {
    let q = trace_exponent(nodes.n);
    let [grad, grad_excess, mass, integral] = par_sum(&nodes.bulk, |b| {
        let (ae, ve) = metric.bulk_excess(eps * b.r, eps * b.t);
        let (a, v) = (1.0 + ae, 1.0 + ve);
        let (r2, t2) = (b.vr * b.vr, b.vt * b.vt);
        [b.w * (a * r2 + v * t2), b.w * (ae * r2 + ve * t2), b.w * v * b.v * b.v, b.w * v * b.v]
    });
    let [boundary_l2, trace_q, trace_q_excess] = par_sum(&nodes.boundary, |b| {
        let se = metric.boundary_excess(eps * b.r);
        let vq = b.v.abs().powf(q);
        [b.w * (1.0 + se) * b.v * b.v, b.w * (1.0 + se) * vq, b.w * se * vq]
    });
    EscobarSums { grad, grad_excess, mass, boundary_l2, trace_q, trace_q_excess, integral }
}

struct FlatMetric(usize);

impl ChartMetric for FlatMetric {
    fn n(&self) -> usize {
        self.0
    }
    fn bulk(&self, _r: f64, _t: f64) -> (f64, f64) {
        (1.0, 1.0)
    }
    fn boundary(&self, _r: f64) -> f64 {
        1.0
    }
    fn mean_curvature(&self) -> f64 {
        0.0
    }
    fn ambient_scal(&self) -> f64 {
        0.0
    }
    fn chart_radius(&self) -> f64 {
        f64::INFINITY
    }
}

/// Flat model as a chart metric.
pub fn flat_metric(n: usize) -> impl ChartMetric {
    FlatMetric(n)
}

/// Truncated Escobar bubble χ_R U₊ on two quadrature resolutions.
#[derive(Debug, Clone)]
pub struct EscobarBubble {
    pub n: usize,
    pub radius: f64,
    coarse: HalfspaceNodes,
    fine: HalfspaceNodes,
    flat_coarse: EscobarSums,
    flat_fine: EscobarSums,
}

/// Coefficients c_k of quotient / flat - 1 = Σ_{k≥1} c_k ε^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub functional: Functional,
    pub radius: f64,
    pub flat_quotient: f64,
    /// Entry k is the coefficient of ε^k (entry 0 is zero).
    pub relative: Vec<f64>,
}

impl EscobarBubble {
    pub fn new(profile: &RadialProfile, radius: f64, spec: &QuadSpec) -> Result<Self> {
        if profile.kind != ProfileKind::EscobarHalfspace {
            return Err(invalid("Escobar bubbles need the Escobar half-space optimizer"));
        }
        if !(radius >= 1.0) || !radius.is_finite() {
            return Err(invalid(format!("cutoff radius must be >= 1, got {radius}")));
        }
        let n = profile.n;
        let (coarse, fine) = rayon::join(
            || HalfspaceNodes::escobar_truncated(profile, radius, spec),
            || HalfspaceNodes::escobar_truncated(profile, radius, &spec.doubled()),
        );
        let flat = FlatMetric(n);
        let flat_coarse = escobar_sums(&coarse, &flat, 1.0);
        let flat_fine = escobar_sums(&fine, &flat, 1.0);
        Ok(Self { n, radius, coarse, fine, flat_coarse, flat_fine })
    }

    /// Flat value S*(R) of the truncated profile.
    pub fn flat_escobar(&self) -> f64 {
        let s = self.flat_fine;
        s.grad / s.trace_q.powf(2.0 / trace_exponent(self.n))
    }

    /// Flat plain-trace value 𝔗(R)/𝔍(R)^{q/2}.
    pub fn flat_plain(&self) -> f64 {
        let s = self.flat_fine;
        s.trace_q / s.grad.powf(trace_exponent(self.n) / 2.0)
    }

    fn escobar_relative(
        &self,
        s: &EscobarSums,
        flat: &EscobarSums,
        eps: f64,
        metric: &dyn ChartMetric,
    ) -> (f64, [f64; 3]) {
        let nf = self.n as f64;
        let q = trace_exponent(self.n);
        let scal = eps * eps * (nf - 2.0) / (4.0 * (nf - 1.0)) * metric.ambient_scal() * s.mass;
        let bdry = eps * (nf - 2.0) / 2.0 * metric.mean_curvature() * s.boundary_l2;
        let dn = s.grad_excess + scal + bdry;
        let rel = ((dn / flat.grad).ln_1p() - 2.0 / q * (s.trace_q_excess / flat.trace_q).ln_1p()).exp_m1();
        (rel, [s.grad, scal, bdry])
    }

    /// Covariant Escobar quotient of the bubble at scale `eps` with amplitude `amplitude`.
    pub fn escobar_quotient(&self, metric: &dyn ChartMetric, eps: f64, amplitude: f64) -> Result<QuotientResult> {
        self.check(metric, eps, amplitude)?;
        let q = trace_exponent(self.n);
        let (sc, sf) =
            rayon::join(|| escobar_sums(&self.coarse, metric, eps), || escobar_sums(&self.fine, metric, eps));
        let (rel_c, _) = self.escobar_relative(&sc, &self.flat_coarse, eps, metric);
        let (rel, terms) = self.escobar_relative(&sf, &self.flat_fine, eps, metric);
        let a2 = amplitude * amplitude;
        let numerator = a2 * (terms[0] + terms[1] + terms[2]);
        let denominator = amplitude.powf(q) * sf.trace_q;
        let flat = self.flat_escobar();
        Ok(QuotientResult {
            functional: Functional::Escobar,
            epsilon: eps,
            radius: self.radius,
            amplitude,
            numerator,
            denominator,
            quotient: numerator / denominator.powf(2.0 / q),
            flat_quotient: flat,
            relative_change: rel,
            reference: flat,
            deficit: flat * rel,
            terms: vec![
                ("gradient".into(), a2 * terms[0]),
                ("scalar_curvature".into(), a2 * terms[1]),
                ("mean_curvature".into(), a2 * terms[2]),
            ],
            error_estimate: flat * (rel - rel_c).abs(),
        })
    }

    fn plain_relative(
        &self,
        nodes: &HalfspaceNodes,
        s: &EscobarSums,
        flat: &EscobarSums,
        eps: f64,
        metric: &dyn ChartMetric,
        mean_zero: bool,
    ) -> (f64, f64) {
        let n = self.n;
        let q = trace_exponent(n);
        let mut dq = s.trace_q_excess;
        let mut shift = 0.0;
        if mean_zero && metric.chart_radius().is_finite() {
            let rc = metric.chart_radius();
            let nf = n as f64;
            let chart_volume = unit_sphere_area(n) * rc.powi(n as i32) / (2.0 * nf);
            shift = eps.powi(n as i32) * s.integral / chart_volume;
            if shift != 0.0 {
                let mut shifted = 0.0;
                for b in &nodes.boundary {
                    let sigma = metric.boundary(eps * b.r);
                    shifted += b.w * sigma * ((b.v - shift).abs().powf(q) - b.v.abs().powf(q));
                }
                let outer = rc / eps;
                let inner = 2.0 * self.radius;
                let exterior =
                    unit_sphere_area(n - 1) / (nf - 1.0) * (outer.powf(nf - 1.0) - inner.powf(nf - 1.0)).max(0.0);
                dq += shifted + exterior * shift.abs().powf(q);
            }
        }
        let rel = ((dq / flat.trace_q).ln_1p() - q / 2.0 * (s.grad_excess / flat.grad).ln_1p()).exp_m1();
        (rel, shift)
    }

    /// Plain trace quotient ‖v‖_{L^q(∂)}^q / (∫|∇v|²)^{q/2}, optionally in the
    /// mean-zero gauge over the chart half-ball.
    pub fn plain_trace_quotient(
        &self,
        metric: &dyn ChartMetric,
        eps: f64,
        amplitude: f64,
        mean_zero: bool,
    ) -> Result<QuotientResult> {
        self.check(metric, eps, amplitude)?;
        let q = trace_exponent(self.n);
        let (sc, sf) =
            rayon::join(|| escobar_sums(&self.coarse, metric, eps), || escobar_sums(&self.fine, metric, eps));
        let (rel_c, _) = self.plain_relative(&self.coarse, &sc, &self.flat_coarse, eps, metric, mean_zero);
        let (rel, shift) = self.plain_relative(&self.fine, &sf, &self.flat_fine, eps, metric, mean_zero);
        let flat = self.flat_plain();
        let numerator = amplitude.powf(q) * sf.trace_q;
        let denominator = (amplitude * amplitude * sf.grad).powf(q / 2.0);
        Ok(QuotientResult {
            functional: Functional::PlainTrace,
            epsilon: eps,
            radius: self.radius,
            amplitude,
            numerator,
            denominator,
            quotient: flat * (1.0 + rel),
            flat_quotient: flat,
            relative_change: rel,
            reference: flat,
            deficit: flat * rel,
            terms: vec![
                ("dirichlet".into(), amplitude * amplitude * sf.grad),
                ("gauge_shift".into(), amplitude * shift),
            ],
            error_estimate: flat * (rel - rel_c).abs(),
        })
    }

    fn check(&self, metric: &dyn ChartMetric, eps: f64, amplitude: f64) -> Result<()> {
        if metric.n() != self.n {
            return Err(invalid(format!("metric dimension {} differs from bubble dimension {}", metric.n(), self.n)));
        }
        check_amplitude(amplitude)?;
        check_chart(eps, self.radius, metric.chart_radius())
    }

    fn degree_sums(&self, jet: &AveragedJet, order: usize) -> DegreeSums {
        let nodes = &self.fine;
        let q = trace_exponent(self.n);
        let len = order + 1;
        let mut d = DegreeSums::new(len);
        for b in &nodes.bulk {
            let a = jet.tangential.by_degree(b.r, b.t);
            let v = jet.volume.by_degree(b.r, b.t);
            for k in 0..len {
                let ak = a.get(k).copied().unwrap_or(0.0);
                let vk = v.get(k).copied().unwrap_or(0.0);
                d.grad[k] += b.w * (ak * b.vr * b.vr + vk * b.vt * b.vt);
                d.mass[k] += b.w * vk * b.v * b.v;
            }
        }
        for b in &nodes.boundary {
            let s = jet.boundary.by_degree(b.r, 0.0);
            for k in 0..len {
                let sk = s.get(k).copied().unwrap_or(0.0);
                d.l2[k] += b.w * sk * b.v * b.v;
                d.trace_q[k] += b.w * sk * b.v.abs().powf(q);
            }
        }
        d
    }

    /// Exact Taylor coefficients in ε of the relative Escobar change on a polynomial jet.
    pub fn escobar_series(&self, jet: &AveragedJet, order: usize) -> SeriesCoefficients {
        let nf = self.n as f64;
        let q = trace_exponent(self.n);
        let d = self.degree_sums(jet, order);
        let mut num = d.grad.clone();
        for k in 0..=order {
            if k >= 2 {
                num[k] += (nf - 2.0) / (4.0 * (nf - 1.0)) * jet.ambient_scal * d.mass[k - 2];
            }
            if k >= 1 {
                num[k] += (nf - 2.0) / 2.0 * jet.mean_curvature * d.l2[k - 1];
            }
        }
        let rel = relative_series(&[(&num, 1.0), (&d.trace_q, -2.0 / q)], order);
        SeriesCoefficients {
            functional: Functional::Escobar,
            radius: self.radius,
            flat_quotient: self.flat_escobar(),
            relative: rel,
        }
    }

    /// Exact Taylor coefficients of the relative plain-trace change (without gauge shift).
    pub fn plain_series(&self, jet: &AveragedJet, order: usize) -> SeriesCoefficients {
        let q = trace_exponent(self.n);
        let d = self.degree_sums(jet, order);
        let rel = relative_series(&[(&d.trace_q, 1.0), (&d.grad, -q / 2.0)], order);
        SeriesCoefficients {
            functional: Functional::PlainTrace,
            radius: self.radius,
            flat_quotient: self.flat_plain(),
            relative: rel,
        }
    }
}

struct DegreeSums {
    grad: Vec<f64>,
    mass: Vec<f64>,
    l2: Vec<f64>,
    trace_q: Vec<f64>,
}

impl DegreeSums {
    fn new(len: usize) -> Self {
        Self { grad: vec![0.0; len], mass: vec![0.0; len], l2: vec![0.0; len], trace_q: vec![0.0; len] }
    }
}

/// Π (S_i/S_i[0])^{e_i} - 1 as a truncated series.
fn relative_series(factors: &[(&Vec<f64>, f64)], order: usize) -> Vec<f64> {
    let mut log = vec![0.0; order + 1];
    for (s, e) in factors {
        let normalized: Vec<f64> = s.iter().map(|x| x / s[0]).collect();
        for (k, l) in series::ln(&normalized, order).into_iter().enumerate() {
            log[k] += e * l;
        }
    }
    let mut out = series::exp(&log, order);
    out[0] = 0.0;
    out
}

// ---------------------------------------------------------------------------
// GN quotients

/// GN bubbles: the half-space profile Q₊ and the ground state Q under χ_R.
#[derive(Debug, Clone)]
pub struct GnBubble {
    pub n: usize,
    pub p: f64,
    pub radius: f64,
    pub c_star: f64,
    boundary: (HalfspaceNodes, HalfspaceNodes),
    interior: (RadialNodes, RadialNodes),
}

#[derive(Debug, Clone, Copy, Default)]
struct GnSums {
    ip: f64,
    ip_ex: f64,
    i2: f64,
    i2_ex: f64,
    j: f64,
    j_ex: f64,
}

impl GnSums {
    fn relative(&self, alpha: f64, beta: f64) -> f64 {
        ((self.ip_ex / (self.ip - self.ip_ex)).ln_1p()
            - alpha / 2.0 * (self.i2_ex / (self.i2 - self.i2_ex)).ln_1p()
            - beta / 2.0 * (self.j_ex / (self.j - self.j_ex)).ln_1p())
        .exp_m1()
    }

    fn flat(&self, alpha: f64, beta: f64) -> f64 {
        let (ip, i2, j) = (self.ip - self.ip_ex, self.i2 - self.i2_ex, self.j - self.j_ex);
        ip / (i2.powf(alpha / 2.0) * j.powf(beta / 2.0))
    }
}

fn gn_boundary_sums(nodes: &HalfspaceNodes, metric: &dyn ChartMetric, eps: f64, p: f64) -> GnSums {
    let [ip, ip_ex, i2, i2_ex, j, j_ex] = par_sum(&nodes.bulk, |b| {
        let (ae, ve) = metric.bulk_excess(eps * b.r, eps * b.t);
        let (a, v) = (1.0 + ae, 1.0 + ve);
        let vp = b.v.abs().powf(p + 1.0);
        let v2 = b.v * b.v;
        let (r2, t2) = (b.vr * b.vr, b.vt * b.vt);
        [b.w * v * vp, b.w * ve * vp, b.w * v * v2, b.w * ve * v2, b.w * (a * r2 + v * t2), b.w * (ae * r2 + ve * t2)]
    });
    GnSums { ip, ip_ex, i2, i2_ex, j, j_ex }
}

fn gn_interior_sums(nodes: &RadialNodes, jet: &InteriorJet, eps: f64, p: f64) -> GnSums {
    let [ip, ip_ex, i2, i2_ex, j, j_ex] = par_sum(&nodes.nodes, |x| {
        let ex = jet.volume_excess(eps * x.rho);
        let vp = x.v.abs().powf(p + 1.0);
        let v2 = x.v * x.v;
        let g2 = x.dv * x.dv;
        [
            x.w * (1.0 + ex) * vp,
            x.w * ex * vp,
            x.w * (1.0 + ex) * v2,
            x.w * ex * v2,
            x.w * (1.0 + ex) * g2,
            x.w * ex * g2,
        ]
    });
    GnSums { ip, ip_ex, i2, i2_ex, j, j_ex }
}

impl GnBubble {
    pub fn new(
        ground: &RadialProfile,
        half: &RadialProfile,
        coefficients: &GnCoefficients,
        spec: &QuadSpec,
    ) -> Result<Self> {
        let p = ground.exponent.ok_or_else(|| invalid("ground state has no exponent"))?;
        let radius = coefficients.radius;
        let fine = spec.doubled();
        Ok(Self {
            n: ground.n,
            p,
            radius,
            c_star: coefficients.c_star,
            boundary: (HalfspaceNodes::gn(half, radius, spec)?, HalfspaceNodes::gn(half, radius, &fine)?),
            interior: (RadialNodes::gn(ground, radius, spec)?, RadialNodes::gn(ground, radius, &fine)?),
        })
    }

    fn result(&self, functional: Functional, eps: f64, coarse: GnSums, fine: GnSums) -> QuotientResult {
        let (alpha, beta) = gn_exponents(self.n, self.p);
        let rel = fine.relative(alpha, beta);
        let rel_c = coarse.relative(alpha, beta);
        let flat = fine.flat(alpha, beta);
        let quotient = flat * (1.0 + rel);
        QuotientResult {
            functional,
            epsilon: eps,
            radius: self.radius,
            amplitude: 1.0,
            numerator: fine.ip,
            denominator: fine.i2.powf(alpha / 2.0) * fine.j.powf(beta / 2.0),
            quotient,
            flat_quotient: flat,
            relative_change: rel,
            reference: self.c_star,
            deficit: (flat - self.c_star) + flat * rel,
            terms: vec![("l_p1".into(), fine.ip), ("l_2".into(), fine.i2), ("dirichlet".into(), fine.j)],
            error_estimate: flat * (rel - rel_c).abs(),
        }
    }

    /// Weinstein quotient of the boundary bubble built from Q₊.
    pub fn boundary_quotient(&self, metric: &dyn ChartMetric, eps: f64) -> Result<QuotientResult> {
        if metric.n() != self.n {
            return Err(invalid("metric dimension differs from the GN bubble dimension"));
        }
        check_chart(eps, self.radius, metric.chart_radius())?;
        let c = gn_boundary_sums(&self.boundary.0, metric, eps, self.p);
        let f = gn_boundary_sums(&self.boundary.1, metric, eps, self.p);
        Ok(self.result(Functional::GnBoundary, eps, c, f))
    }

    /// Weinstein quotient of the interior bubble built from Q.
    pub fn interior_quotient(&self, jet: &InteriorJet, eps: f64) -> Result<QuotientResult> {
        if jet.n != self.n {
            return Err(invalid("jet dimension differs from the GN bubble dimension"));
        }
        check_chart(eps, self.radius, jet.chart_radius)?;
        let c = gn_interior_sums(&self.interior.0, jet, eps, self.p);
        let f = gn_interior_sums(&self.interior.1, jet, eps, self.p);
        Ok(self.result(Functional::GnInterior, eps, c, f))
    }

    /// Exact Taylor coefficients of W/W₀ - 1 for a boundary bubble on a polynomial jet.
    pub fn boundary_series(&self, jet: &AveragedJet, order: usize) -> Vec<f64> {
        let (alpha, beta) = gn_exponents(self.n, self.p);
        let len = order + 1;
        let (mut ip, mut i2, mut j) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for b in &self.boundary.1.bulk {
            let a = jet.tangential.by_degree(b.r, b.t);
            let v = jet.volume.by_degree(b.r, b.t);
            let vp = b.v.abs().powf(self.p + 1.0);
            for k in 0..len {
                let ak = a.get(k).copied().unwrap_or(0.0);
                let vk = v.get(k).copied().unwrap_or(0.0);
                ip[k] += b.w * vk * vp;
                i2[k] += b.w * vk * b.v * b.v;
                j[k] += b.w * (ak * b.vr * b.vr + vk * b.vt * b.vt);
            }
        }
        relative_series(&[(&ip, 1.0), (&i2, -alpha / 2.0), (&j, -beta / 2.0)], order)
    }

    /// Exact Taylor coefficients of W/W₀ - 1 for an interior bubble.
    pub fn interior_series(&self, jet: &InteriorJet, order: usize) -> Vec<f64> {
        let (alpha, beta) = gn_exponents(self.n, self.p);
        let len = order + 1;
        let (mut ip, mut i2, mut j) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for x in &self.interior.1.nodes {
            let v = jet.volume.by_degree(x.rho, 0.0);
            let vp = x.v.abs().powf(self.p + 1.0);
            for k in 0..len {
                let vk = v.get(k).copied().unwrap_or(0.0);
                ip[k] += x.w * vk * vp;
                i2[k] += x.w * vk * x.v * x.v;
                j[k] += x.w * vk * x.dv * x.dv;
            }
        }
        relative_series(&[(&ip, 1.0), (&i2, -alpha / 2.0), (&j, -beta / 2.0)], order)
    }
}

/// Ground state, half-space near-optimizer, their coefficients, and the bubbles built from them.
#[derive(Debug, Clone)]
pub struct GnModel {
    pub ground: RadialProfile,
    pub half: RadialProfile,
    pub coefficients: GnCoefficients,
    pub bubble: GnBubble,
}

impl GnModel {
    pub fn build(n: usize, p: f64, delta0: f64, radius: f64, spec: &QuadSpec) -> Result<Self> {
        let ground = gn_ground_state(n, p)?;
        let c_star = RadialNodes::gn(&ground, radius, spec)?.weinstein(p);
        let half = gn_halfspace_near_optimizer_from(&ground, c_star, delta0)?;
        let coefficients = gn_coefficients(&ground, &half, radius, spec)?;
        let bubble = GnBubble::new(&ground, &half, &coefficients, spec)?;
        Ok(Self { ground, half, coefficients, bubble })
    }
}

// ---------------------------------------------------------------------------
// Sweeps

/// Deficit of one sweep level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitPoint {
    pub epsilon: f64,
    /// E(ε) = quotient - reference.
    pub deficit: f64,
    /// E(ε) / reference.
    pub relative: f64,
    pub error_estimate: f64,
}

/// Where deficits come from.
pub enum DeficitSource<'a> {
    /// Escobar quotients of a fixed-cutoff bubble over a chart metric.
    Escobar { bubble: &'a EscobarBubble, metric: &'a dyn ChartMetric },
    /// Prescribed polynomial E(ε) = Σ_k coefficients[k] ε^k, reported against `reference`.
    Synthetic { reference: f64, coefficients: Vec<f64> },
}

/// Evaluates E(x, ε) over a grid, in grid order.
pub fn deficit_series(source: &DeficitSource<'_>, grid: &[f64]) -> Result<Vec<DeficitPoint>> {
    match source {
        DeficitSource::Escobar { bubble, metric } => grid
            .iter()
            .map(|&eps| {
                let r = bubble.escobar_quotient(*metric, eps, 1.0)?;
                Ok(DeficitPoint {
                    epsilon: eps,
                    deficit: r.deficit,
                    relative: r.relative_change,
                    error_estimate: r.error_estimate,
                })
            })
            .collect(),
        DeficitSource::Synthetic { reference, coefficients } => grid
            .iter()
            .map(|&eps| {
                if !(eps > 0.0) {
                    return Err(invalid(format!("scale must be positive, got {eps}")));
                }
                let e: f64 = coefficients.iter().rev().fold(0.0, |acc, c| acc * eps + c);
                Ok(DeficitPoint { epsilon: eps, deficit: e, relative: e / reference, error_estimate: 0.0 })
            })
            .collect(),
    }
}

/// Escobar quotients with the cutoff growing as R(ε) = max(1, scale/ε).
pub fn diagonal_sweep(
    profile: &RadialProfile,
    metric: &dyn ChartMetric,
    grid: &[f64],
    scale: f64,
    spec: &QuadSpec,
) -> Result<Vec<QuotientResult>> {
    grid.iter()
        .map(|&eps| {
            let bubble = EscobarBubble::new(profile, (scale / eps).max(1.0), spec)?;
            bubble.escobar_quotient(metric, eps, 1.0)
        })
        .collect()
}

/// Least-squares fit of relative changes against the given powers of ε.
pub fn fit_relative(results: &[QuotientResult], powers: &[i32]) -> Result<PowerFit> {
    let xs: Vec<f64> = results.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = results.iter().map(|r| r.relative_change).collect();
    fit_powers(&xs, &ys, powers)
}

/// Fitted second-order channel weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub n: usize,
    pub grid: Vec<f64>,
    /// Cutoff radius R(ε) = scale/ε.
    pub diagonal_scale: f64,
    /// ε² coefficient on the Ric(ν,ν) = 1 jet.
    pub kappa1: f64,
    /// ε² coefficient on the Scal_∂ = 1 jet.
    pub kappa2: f64,
    /// ε² coefficient on the |II̊|² = 1, H = 0 jet.
    pub kappa3_fit: f64,
    /// (4-n)/(2(n-1)) ∫y_n²|∇U₊|².
    pub kappa3_moment: f64,
    /// Moment value plus the ambient scalar-curvature weight.
    pub kappa3_with_scal: f64,
    /// ε² coefficient on the flat jet.
    pub flat_c2: f64,
    pub fits: Vec<(String, PowerFit)>,
}

/// Fits the ε² coefficients of the channel-isolating jets in the diagonal cutoff regime.
pub fn channel_fit_second_order(
    profile: &RadialProfile,
    constants: &EscobarConstants,
    grid: &[f64],
    diagonal_scale: f64,
    spec: &QuadSpec,
) -> Result<ChannelFit> {
    let n = profile.n;
    if n < 5 {
        return Err(Error::LogDivergentMoment { n });
    }
    let kappa3 = constants.kappa3.ok_or(Error::LogDivergentMoment { n })?;
    let scal_weight = constants.scal_weight.ok_or(Error::LogDivergentMoment { n })?;
    let geometries = [
        ("ricci-only", ModelGeometry::RicciOnly { ric_normal: 1.0 }),
        ("boundary-scal-only", ModelGeometry::BoundaryScalOnly { scal_boundary: 1.0 }),
        ("anisotropic", ModelGeometry::AnisotropicCylinderLike { amplitude: std::f64::consts::FRAC_1_SQRT_2 }),
        ("flat", ModelGeometry::FlatHalfspace),
    ];
    let fits = geometries
        .par_iter()
        .map(|(name, g)| {
            let jet = fermi_jet(&g.boundary_data(n)?, 2)?.averaged();
            let results = diagonal_sweep(profile, &jet, grid, diagonal_scale, spec)?;
            Ok(((*name).to_string(), fit_relative(&results, &[2, 3])?))
        })
        .collect::<Result<Vec<_>>>()?;
    let c2 = |i: usize| fits[i].1.coeffs[0];
    Ok(ChannelFit {
        n,
        grid: grid.to_vec(),
        diagonal_scale,
        kappa1: c2(0),
        kappa2: c2(1),
        kappa3_fit: c2(2),
        kappa3_moment: kappa3,
        kappa3_with_scal: kappa3 + scal_weight,
        flat_c2: c2(3),
        fits,
    })
}

/// Stores fitted channel weights in the constants.
pub fn apply_channel_fit(constants: &mut EscobarConstants, fit: &ChannelFit) {
    constants.kappa1 = Some(fit.kappa1);
    constants.kappa2 = Some(fit.kappa2);
    constants.kappa3_effective = Some(fit.kappa3_fit);
}
