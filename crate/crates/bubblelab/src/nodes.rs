//! Quadrature node sets carrying precomputed profile values.
//!
//! Every weighted integral in the crate is a sum over one of these sets. Half-space
//! sets live in the quarter plane `(r, t) = (|y'|, y_n)` with the tangential
//! sphere factor `ω_{n-2} r^{n-2}` folded into the weights; interior sets are radial
//! with `ω_{n-1} ρ^{n-1}` folded in.

use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Result};
use crate::profiles::{bump, ProfileKind, RadialProfile};
use crate::quadrature::{dyadic_breaks, split_panels, GaussLegendre, QuadSpec};
use crate::special::unit_sphere_area;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkNode {
    pub r: f64,
    pub t: f64,
    pub w: f64,
    pub v: f64,
    pub vr: f64,
    pub vt: f64,
}

impl BulkNode {
    pub fn grad2(&self) -> f64 {
        self.vr * self.vr + self.vt * self.vt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub r: f64,
    pub w: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialNode {
    pub rho: f64,
    pub w: f64,
    pub v: f64,
    pub dv: f64,
}

/// Nodes over the half-space (bulk) and its boundary hyperplane.
#[derive(Debug, Clone)]
pub struct HalfspaceNodes {
    pub n: usize,
    pub bulk: Vec<BulkNode>,
    pub boundary: Vec<BoundaryNode>,
    /// Cutoff radius applied to the profile, if any.
    pub cutoff: Option<f64>,
}

/// Nodes over ℝⁿ for a radial profile.
#[derive(Debug, Clone)]
pub struct RadialNodes {
    pub n: usize,
    pub nodes: Vec<RadialNode>,
    pub cutoff: Option<f64>,
}

/// Radial breakpoints used under a cutoff of radius `r_cut`: dyadic up to R,
/// eight equal panels across the transition annulus.
fn cutoff_breaks(r_cut: f64) -> Vec<f64> {
    let mut b = dyadic_breaks(0.5, r_cut);
    for k in 1..=8 {
        b.push(r_cut * (1.0 + k as f64 / 8.0));
    }
    b
}

fn apply_cutoff(e: (f64, f64, f64), r: f64, t: f64, r_cut: Option<f64>) -> (f64, f64, f64) {
    let Some(rc) = r_cut else { return e };
    let rho = (r * r + t * t).sqrt();
    let (c, dc) = bump(rho / rc);
    if dc == 0.0 || rho == 0.0 {
        return (c * e.0, c * e.1, c * e.2);
    }
    let d = dc / rc;
    (c * e.0, c * e.1 + d * r / rho * e.0, c * e.2 + d * t / rho * e.0)
}

impl HalfspaceNodes {
    /// Polar layout about the origin for algebraically decaying profiles, truncated
    /// by the cutoff χ_R.
    pub fn escobar_truncated(profile: &RadialProfile, r_cut: f64, spec: &QuadSpec) -> Self {
        let breaks = cutoff_breaks(r_cut);
        Self::polar(profile, &breaks, None, Some(r_cut), spec)
    }

    /// Polar layout over the whole half-space without cutoff: a finite disk plus the
    /// exterior mapped by ρ = ρ₀/u.
    pub fn escobar_full(profile: &RadialProfile, spec: &QuadSpec) -> Self {
        let breaks = dyadic_breaks(0.5, 4.0);
        Self::polar(profile, &breaks, Some(4.0), None, spec)
    }

    fn polar(
        profile: &RadialProfile,
        breaks: &[f64],
        exterior_from: Option<f64>,
        r_cut: Option<f64>,
        spec: &QuadSpec,
    ) -> Self {
        let n = profile.n;
        let area = unit_sphere_area(n - 1);
        let rule = spec.rule();
        let sub = spec.subdivisions;
        // (ρ, dρ-weight) pairs along the radius
        let mut radial: Vec<(f64, f64)> = Vec::new();
        for (a, b) in split_panels(breaks, sub) {
            radial.extend(rule.mapped(a, b));
        }
        if let Some(rho0) = exterior_from {
            for (a, b) in split_panels(&[0.0, 0.125, 0.25, 0.5, 1.0], sub) {
                for (u, wu) in rule.mapped(a, b) {
                    radial.push((rho0 / u, wu * rho0 / (u * u)));
                }
            }
        }
        let angular: Vec<(f64, f64)> = split_panels(&[0.0, FRAC_PI_2 / 2.0, FRAC_PI_2], sub)
            .into_iter()
            .flat_map(|(a, b)| rule.mapped(a, b).collect::<Vec<_>>())
            .collect();
        let bulk: Vec<BulkNode> = radial
            .par_iter()
            .flat_map_iter(|&(rho, wr)| {
                angular.iter().map(move |&(phi, wp)| {
                    let r = rho * phi.cos();
                    let t = rho * phi.sin();
                    let e = profile.half(r, t);
                    let (v, vr, vt) = apply_cutoff((e.v, e.vr, e.vt), r, t, r_cut);
                    BulkNode { r, t, w: wr * wp * rho * area * r.powi(n as i32 - 2), v, vr, vt }
                })
            })
            .collect();
        let boundary = radial
            .iter()
            .map(|&(r, wr)| {
                let e = profile.half(r, 0.0);
                let (v, _, _) = apply_cutoff((e.v, e.vr, e.vt), r, 0.0, r_cut);
                BoundaryNode { r, w: wr * area * r.powi(n as i32 - 2), v }
            })
            .collect();
        Self { n, bulk, boundary, cutoff: r_cut }
    }

    /// Cartesian layout for the shifted GN near-optimizer, truncated by χ_R.
    pub fn gn(profile: &RadialProfile, r_cut: f64, spec: &QuadSpec) -> Result<Self> {
        if profile.kind != ProfileKind::GnHalfspaceNearOptimizer {
            return Err(invalid("Cartesian GN layout needs a half-space near-optimizer"));
        }
        let n = profile.n;
        let s = profile.shift.unwrap_or(0.0);
        let reach = 2.0 * r_cut;
        let r_end = reach.min(30.0);
        let t_end = reach.min(s + 30.0);
        let rule = spec.rule();
        let sub = spec.subdivisions;
        let even = |a: f64, b: f64, width: f64| -> Vec<f64> {
            let k = ((b - a) / width).ceil().max(1.0) as usize;
            (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
        };
        let r_pts: Vec<(f64, f64)> = split_panels(&even(0.0, r_end, 2.0), sub)
            .into_iter()
            .flat_map(|(a, b)| rule.mapped(a, b).collect::<Vec<_>>())
            .collect();
        let mut t_breaks = even(0.0, s.min(t_end), s / 4.0);
        if t_end > s {
            t_breaks.extend(even(s, t_end, 2.0).into_iter().skip(1));
        }
        let t_pts: Vec<(f64, f64)> =
            split_panels(&t_breaks, sub).into_iter().flat_map(|(a, b)| rule.mapped(a, b).collect::<Vec<_>>()).collect();
        let area = unit_sphere_area(n - 1);
        let cut = Some(r_cut);
        let bulk = r_pts
            .par_iter()
            .flat_map_iter(|&(r, wr)| {
                let rw = wr * area * r.powi(n as i32 - 2);
                t_pts.iter().map(move |&(t, wt)| {
                    let e = profile.half(r, t);
                    let (v, vr, vt) = apply_cutoff((e.v, e.vr, e.vt), r, t, cut);
                    BulkNode { r, t, w: rw * wt, v, vr, vt }
                })
            })
            .collect();
        Ok(Self { n, bulk, boundary: Vec::new(), cutoff: cut })
    }

    pub fn dirichlet(&self) -> f64 {
        self.bulk.iter().map(|b| b.w * b.grad2()).sum()
    }

    pub fn bulk_power(&self, p: f64) -> f64 {
        self.bulk.iter().map(|b| b.w * b.v.abs().powf(p)).sum()
    }

    pub fn boundary_power(&self, p: f64) -> f64 {
        self.boundary.iter().map(|b| b.w * b.v.abs().powf(p)).sum()
    }

    /// Weinstein quotient ‖u‖_{p+1}^{p+1} / (‖u‖₂^α ‖∇u‖₂^β).
    pub fn weinstein(&self, p: f64) -> f64 {
        let (a, b) = gn_exponents(self.n, p);
        self.bulk_power(p + 1.0) / (self.bulk_power(2.0).powf(a / 2.0) * self.dirichlet().powf(b / 2.0))
    }
}

/// Interpolation exponents (α, β) of the Weinstein functional.
pub fn gn_exponents(n: usize, p: f64) -> (f64, f64) {
    let nf = n as f64;
    (2.0 - (nf - 2.0) * (p - 1.0) / 2.0, nf * (p - 1.0) / 2.0)
}

impl RadialNodes {
    /// Whole-space layout for algebraically decaying radial profiles (ρ = 4/u outside ρ = 4).
    pub fn full(profile: &RadialProfile, spec: &QuadSpec) -> Self {
        let n = profile.n;
        let rule = spec.rule();
        let area = unit_sphere_area(n);
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for (a, b) in split_panels(&dyadic_breaks(0.5, 4.0), spec.subdivisions) {
            pts.extend(rule.mapped(a, b));
        }
        for (a, b) in split_panels(&[0.0, 0.125, 0.25, 0.5, 1.0], spec.subdivisions) {
            for (u, wu) in rule.mapped(a, b) {
                pts.push((4.0 / u, wu * 4.0 / (u * u)));
            }
        }
        let center_free = RadialProfile { center: Vec::new(), ..profile.clone() };
        let nodes = pts
            .into_iter()
            .map(|(rho, w)| {
                let (v, dv) = center_free.radial(rho);
                RadialNode { rho, w: w * area * rho.powi(n as i32 - 1), v, dv }
            })
            .collect();
        Self { n, nodes, cutoff: None }
    }

    /// Layout for exponentially decaying ground states, truncated by χ_R.
    pub fn gn(profile: &RadialProfile, r_cut: f64, spec: &QuadSpec) -> Result<Self> {
        if profile.kind != ProfileKind::GnGroundState {
            return Err(invalid("radial GN layout needs a ground state"));
        }
        let n = profile.n;
        let end = (2.0 * r_cut).min(40.0);
        let k = (end / 0.5).ceil() as usize;
        let breaks: Vec<f64> = (0..=k).map(|i| end * i as f64 / k as f64).collect();
        let rule: GaussLegendre = spec.rule();
        let area = unit_sphere_area(n);
        let nodes = split_panels(&breaks, spec.subdivisions)
            .into_iter()
            .flat_map(|(a, b)| rule.mapped(a, b).collect::<Vec<_>>())
            .map(|(rho, w)| {
                let (q, dq) = profile.radial(rho);
                let (c, dc) = bump(rho / r_cut);
                RadialNode { rho, w: w * area * rho.powi(n as i32 - 1), v: c * q, dv: c * dq + dc / r_cut * q }
            })
            .collect();
        Ok(Self { n, nodes, cutoff: Some(r_cut) })
    }

    pub fn dirichlet(&self) -> f64 {
        self.nodes.iter().map(|x| x.w * x.dv * x.dv).sum()
    }

    pub fn power(&self, p: f64) -> f64 {
        self.nodes.iter().map(|x| x.w * x.v.abs().powf(p)).sum()
    }

    pub fn weinstein(&self, p: f64) -> f64 {
        let (a, b) = gn_exponents(self.n, p);
        self.power(p + 1.0) / (self.power(2.0).powf(a / 2.0) * self.dirichlet().powf(b / 2.0))
    }
}
