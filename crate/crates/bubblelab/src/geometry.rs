//! Pointwise boundary curvature data, second-order Fermi jets, and model geometries.
//!
//! Conventions: II is taken with respect to the inner normal, so the unit ball has
//! II = Id and H = tr II = n - 1. Fermi coordinates are `(y', y_n)` with `y_n` the
//! distance to the boundary; jets are polynomials in these coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::poly::{Bivariate, Poly};

/// Curvature data at one boundary point.
///
/// Optional tensors fall back to the isotropic defaults: R_{anbn} = Ric(ν,ν)/(n-1) δ,
/// boundary Riemann tensor of constant curvature Scal_∂ / ((n-1)(n-2)), and zero
/// tangential derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryPointData {
    pub n: usize,
    /// Second fundamental form, (n-1)×(n-1), symmetric.
    pub second_fundamental_form: Vec<Vec<f64>>,
    /// Optional declared mean curvature, checked against tr II.
    #[serde(default)]
    pub mean_curvature: Option<f64>,
    #[serde(default)]
    pub ric_normal: f64,
    #[serde(default)]
    pub scal_boundary: f64,
    /// R_{anbn}, (n-1)×(n-1).
    #[serde(default)]
    pub normal_curvature: Option<Vec<Vec<f64>>>,
    /// Boundary Riemann tensor R̄_{acbd}, flattened with index order (a, c, b, d).
    #[serde(default)]
    pub boundary_riemann: Option<Vec<f64>>,
    /// Tangential derivative ∇_c II_ab, flattened with index order (c, a, b).
    #[serde(default)]
    pub grad_second_fundamental_form: Option<Vec<f64>>,
    #[serde(default)]
    pub normal_derivative_ric_normal: f64,
    #[serde(default)]
    pub normal_derivative_scal_boundary: f64,
    /// ⟨∇_ν II̊, II̊⟩.
    #[serde(default)]
    pub normal_derivative_traceless: f64,
    #[serde(default)]
    pub laplacian_mean_curvature: f64,
}

impl BoundaryPointData {
    /// Flat half-space data in dimension `n`.
    pub fn flat(n: usize) -> Self {
        Self {
            n,
            second_fundamental_form: vec![vec![0.0; n - 1]; n - 1],
            mean_curvature: None,
            ric_normal: 0.0,
            scal_boundary: 0.0,
            normal_curvature: None,
            boundary_riemann: None,
            grad_second_fundamental_form: None,
            normal_derivative_ric_normal: 0.0,
            normal_derivative_scal_boundary: 0.0,
            normal_derivative_traceless: 0.0,
            laplacian_mean_curvature: 0.0,
        }
    }

    /// Data with II = diag(entries) and everything else zero.
    pub fn with_principal_curvatures(n: usize, kappas: &[f64]) -> Self {
        let mut d = Self::flat(n);
        for (i, &k) in kappas.iter().enumerate().take(n - 1) {
            d.second_fundamental_form[i][i] = k;
        }
        d
    }

    pub fn dim_boundary(&self) -> usize {
        self.n - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(invalid(format!("dimension must be >= 2, got {n}")));
        }
        let m = n - 1;
        let ii = &self.second_fundamental_form;
        if ii.len() != m || ii.iter().any(|row| row.len() != m) {
            return Err(invalid(format!("second fundamental form must be {m}x{m}")));
        }
        for a in 0..m {
            for b in 0..m {
                if !ii[a][b].is_finite() {
                    return Err(invalid("second fundamental form has non-finite entries"));
                }
                if (ii[a][b] - ii[b][a]).abs() > 1e-12 * (1.0 + ii[a][b].abs()) {
                    return Err(invalid("second fundamental form is not symmetric"));
                }
            }
        }
        if let Some(h) = self.mean_curvature {
            if (h - self.trace_ii()).abs() > 1e-12 * (1.0 + h.abs()) {
                return Err(invalid(format!("declared H = {h} differs from tr II = {}", self.trace_ii())));
            }
        }
        if let Some(rn) = &self.normal_curvature {
            if rn.len() != m || rn.iter().any(|row| row.len() != m) {
                return Err(invalid(format!("normal curvature must be {m}x{m}")));
            }
            let tr: f64 = (0..m).map(|a| rn[a][a]).sum();
            if (tr - self.ric_normal).abs() > 1e-10 * (1.0 + tr.abs()) {
                return Err(invalid(format!("trace of R_(anbn) = {tr} differs from Ric(nu,nu) = {}", self.ric_normal)));
            }
        }
        if let Some(r) = &self.boundary_riemann {
            if r.len() != m.pow(4) {
                return Err(invalid(format!("boundary Riemann tensor needs {} entries", m.pow(4))));
            }
        }
        if let Some(g) = &self.grad_second_fundamental_form {
            if g.len() != m.pow(3) {
                return Err(invalid(format!("tangential derivative of II needs {} entries", m.pow(3))));
            }
        }
        if n <= 2 && self.scal_boundary != 0.0 {
            return Err(invalid("a one-dimensional boundary has no scalar curvature"));
        }
        Ok(())
    }

    fn trace_ii(&self) -> f64 {
        (0..self.n - 1).map(|a| self.second_fundamental_form[a][a]).sum()
    }

    /// H = tr II.
    pub fn h(&self) -> f64 {
        self.trace_ii()
    }

    pub fn ii_norm2(&self) -> f64 {
        self.second_fundamental_form.iter().flatten().map(|x| x * x).sum()
    }

    /// II̊ = II - H/(n-1) Id.
    pub fn traceless(&self) -> Vec<Vec<f64>> {
        let m = self.n - 1;
        let h = self.h() / m as f64;
        (0..m)
            .map(|a| (0..m).map(|b| self.second_fundamental_form[a][b] - if a == b { h } else { 0.0 }).collect())
            .collect()
    }

    /// |II̊|² = |II|² - H²/(n-1), clamped at zero against rounding.
    pub fn ring_norm2(&self) -> f64 {
        let m = (self.n - 1) as f64;
        (self.ii_norm2() - self.h() * self.h() / m).max(0.0)
    }

    /// Ambient scalar curvature at the point from the Gauss equation:
    /// Scal = Scal_∂ + 2 Ric(ν,ν) - H² + |II|².
    pub fn ambient_scal(&self) -> f64 {
        self.scal_boundary + 2.0 * self.ric_normal - self.h() * self.h() + self.ii_norm2()
    }

    pub fn normal_curvature_at(&self, a: usize, b: usize) -> f64 {
        match &self.normal_curvature {
            Some(rn) => rn[a][b],
            None => {
                if a == b {
                    self.ric_normal / (self.n - 1) as f64
                } else {
                    0.0
                }
            }
        }
    }

    /// R̄_{acbd}.
    pub fn boundary_riemann_at(&self, a: usize, c: usize, b: usize, d: usize) -> f64 {
        let m = self.n - 1;
        match &self.boundary_riemann {
            Some(r) => r[((a * m + c) * m + b) * m + d],
            None => {
                if m < 2 {
                    return 0.0;
                }
                let k = self.scal_boundary / (m as f64 * (m as f64 - 1.0));
                let dl = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                k * (dl(a, b) * dl(c, d) - dl(a, d) * dl(c, b))
            }
        }
    }

    /// Ric_∂, contracted from R̄.
    pub fn boundary_ricci(&self) -> Vec<Vec<f64>> {
        let m = self.n - 1;
        (0..m).map(|c| (0..m).map(|d| (0..m).map(|a| self.boundary_riemann_at(a, c, a, d)).sum()).collect()).collect()
    }

    /// ∇_c II_ab.
    pub fn grad_ii_at(&self, c: usize, a: usize, b: usize) -> f64 {
        let m = self.n - 1;
        self.grad_second_fundamental_form.as_ref().map_or(0.0, |g| g[(c * m + a) * m + b])
    }

    /// ∇_c H.
    pub fn grad_h_at(&self, c: usize) -> f64 {
        (0..self.n - 1).map(|a| self.grad_ii_at(c, a, a)).sum()
    }
}

/// Second-order Fermi jet of the metric at a boundary point.
#[derive(Debug, Clone)]
pub struct FermiJetMetric {
    pub data: BoundaryPointData,
    pub order: u8,
    pub chart_radius: f64,
    /// g_ab, (n-1)×(n-1) polynomials in (y', y_n).
    pub g: Vec<Vec<Poly>>,
    /// g^ab.
    pub g_inv: Vec<Vec<Poly>>,
    /// √|g|.
    pub volume: Poly,
    /// Boundary area element √det g_ab(y', 0).
    pub boundary_element: Poly,
}

/// Builds the Fermi jet of `data` truncated at `order` (1 or 2).
pub fn fermi_jet(data: &BoundaryPointData, order: u8) -> Result<FermiJetMetric> {
    fermi_jet_with_radius(data, order, 1.0)
}

pub fn fermi_jet_with_radius(data: &BoundaryPointData, order: u8, chart_radius: f64) -> Result<FermiJetMetric> {
    if order != 1 && order != 2 {
        return Err(invalid(format!("jet order must be 1 or 2, got {order}")));
    }
    if !(chart_radius > 0.0) {
        return Err(invalid(format!("chart radius must be positive, got {chart_radius}")));
    }
    data.validate()?;
    let n = data.n;
    let m = n - 1;
    let tn = m; // index of y_n
    let ii = &data.second_fundamental_form;
    let ii2 = |a: usize, b: usize| -> f64 { (0..m).map(|c| ii[a][c] * ii[c][b]).sum() };
    let h = data.h();
    let mut g = vec![vec![Poly::zero(n); m]; m];
    let mut g_inv = vec![vec![Poly::zero(n); m]; m];
    for a in 0..m {
        for b in 0..m {
            let (ga, gi) = (&mut g[a][b], &mut g_inv[a][b]);
            if a == b {
                ga.add_term(vec![0; n], 1.0);
                gi.add_term(vec![0; n], 1.0);
            }
            ga.add_linear(tn, -2.0 * ii[a][b]);
            gi.add_linear(tn, 2.0 * ii[a][b]);
            if order == 2 {
                for c in 0..m {
                    for d in 0..m {
                        let rb = data.boundary_riemann_at(a, c, b, d);
                        ga.add_quadratic(c, d, -rb / 3.0);
                        gi.add_quadratic(c, d, rb / 3.0);
                    }
                    let dii = data.grad_ii_at(c, a, b);
                    ga.add_quadratic(c, tn, -2.0 * dii);
                    gi.add_quadratic(c, tn, 2.0 * dii);
                }
                let rn = data.normal_curvature_at(a, b);
                ga.add_quadratic(tn, tn, ii2(a, b) - rn);
                gi.add_quadratic(tn, tn, 3.0 * ii2(a, b) + rn);
            }
        }
    }
    let mut volume = Poly::constant(n, 1.0);
    volume.add_linear(tn, -h);
    let mut boundary_element = Poly::constant(n, 1.0);
    if order == 2 {
        for c in 0..m {
            volume.add_quadratic(c, tn, -data.grad_h_at(c));
        }
        volume.add_quadratic(tn, tn, 0.5 * (h * h - data.ii_norm2() - data.ric_normal));
        let ric = data.boundary_ricci();
        for c in 0..m {
            for d in 0..m {
                volume.add_quadratic(c, d, -ric[c][d] / 6.0);
                boundary_element.add_quadratic(c, d, -ric[c][d] / 6.0);
            }
        }
    }
    Ok(FermiJetMetric { data: data.clone(), order, chart_radius, g, g_inv, volume, boundary_element })
}

impl FermiJetMetric {
    pub fn n(&self) -> usize {
        self.data.n
    }

    /// Largest coefficient of g^{ab} g_{bc} - δ_{ac} among monomials of degree ≤ `order`.
    pub fn inverse_residual(&self) -> f64 {
        let m = self.n() - 1;
        let mut worst = 0.0f64;
        for a in 0..m {
            for c in 0..m {
                let mut p = Poly::zero(self.n());
                for b in 0..m {
                    p = p.add(&self.g_inv[a][b].mul(&self.g[b][c]));
                }
                if a == c {
                    p.add_term(vec![0; self.n()], -1.0);
                }
                worst = worst.max(p.truncated(self.order as u32).max_abs());
            }
        }
        worst
    }

    /// Tangentially averaged bulk weights (A, V): the Dirichlet density of a
    /// tangentially radial w is A·w_r² + V·w_t² and the volume density is V.
    pub fn averaged(&self) -> AveragedJet {
        let n = self.n();
        let m = n - 1;
        let mut contraction = Poly::zero(n);
        for a in 0..m {
            for b in 0..m {
                let yy = Poly::var(n, a).mul(&Poly::var(n, b));
                contraction = contraction.add(&self.g_inv[a][b].mul(&yy));
            }
        }
        let unit = |mut b: Bivariate| {
            debug_assert!((b.coeff(0, 0) - 1.0).abs() < 1e-12);
            b.terms.insert((0, 0), 1.0);
            b
        };
        AveragedJet {
            n,
            tangential: unit(contraction.mul(&self.volume).tangential_average().divide_r2()),
            volume: unit(self.volume.tangential_average()),
            boundary: unit(self.boundary_element.tangential_average()),
            mean_curvature: self.data.h(),
            ambient_scal: self.data.ambient_scal(),
            chart_radius: self.chart_radius,
        }
    }
}

/// Boundary area element of the truncated jet at y'.
pub fn boundary_area_element(data: &BoundaryPointData, y_tan: &[f64]) -> f64 {
    let ric = data.boundary_ricci();
    let m = data.n - 1;
    let mut s = 1.0;
    for c in 0..m {
        for d in 0..m {
            s -= ric[c][d] * y_tan[c] * y_tan[d] / 6.0;
        }
    }
    s
}

/// Pointwise metric weights seen by a tangentially radial profile after averaging
/// over tangential directions.
pub trait ChartMetric: Sync {
    fn n(&self) -> usize;
    /// (A, V) at physical Fermi coordinates (|y'|, y_n).
    fn bulk(&self, r: f64, t: f64) -> (f64, f64);
    /// Averaged boundary area element at physical radius |y'|.
    fn boundary(&self, r: f64) -> f64;
    fn mean_curvature(&self) -> f64;
    fn ambient_scal(&self) -> f64;
    fn chart_radius(&self) -> f64;
    /// (A - 1, V - 1) without cancellation.
    fn bulk_excess(&self, r: f64, t: f64) -> (f64, f64) {
        let (a, v) = self.bulk(r, t);
        (a - 1.0, v - 1.0)
    }
    /// Boundary element minus one without cancellation.
    fn boundary_excess(&self, r: f64) -> f64 {
        self.boundary(r) - 1.0
    }
}

/// Averaged Fermi jet: polynomial weights in (r, t).
#[derive(Debug, Clone)]
pub struct AveragedJet {
    pub n: usize,
    pub tangential: Bivariate,
    pub volume: Bivariate,
    pub boundary: Bivariate,
    pub mean_curvature: f64,
    pub ambient_scal: f64,
    pub chart_radius: f64,
}

impl ChartMetric for AveragedJet {
    fn n(&self) -> usize {
        self.n
    }
    fn bulk(&self, r: f64, t: f64) -> (f64, f64) {
        (self.tangential.eval(r, t), self.volume.eval(r, t))
    }
    fn boundary(&self, r: f64) -> f64 {
        self.boundary.eval(r, 0.0)
    }
    fn mean_curvature(&self) -> f64 {
        self.mean_curvature
    }
    fn ambient_scal(&self) -> f64 {
        self.ambient_scal
    }
    fn chart_radius(&self) -> f64 {
        self.chart_radius
    }
    fn bulk_excess(&self, r: f64, t: f64) -> (f64, f64) {
        (self.tangential.eval_minus_one(r, t), self.volume.eval_minus_one(r, t))
    }
    fn boundary_excess(&self, r: f64) -> f64 {
        self.boundary.eval_minus_one(r, 0.0)
    }
}

/// ln(sin x / x), accurate near zero.
fn ln_sinc(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        -x2 * (1.0 / 6.0 + x2 * (1.0 / 180.0 + x2 * (1.0 / 2835.0 + x2 / 37800.0)))
    } else {
        (x.sin() / x).ln()
    }
}

/// Exact Fermi metric of the flat ball of radius `radius` at a boundary point:
/// g = dt² + (1 - t/ρ)² ρ² g_{S^{n-1}}, with boundary normal coordinates on the sphere.
///
/// A negative radius gives the complement of the ball of radius |ρ|, whose
/// boundary has H = -(n-1)/|ρ| with respect to the inner normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactBall {
    pub n: usize,
    pub radius: f64,
}

impl ChartMetric for ExactBall {
    fn n(&self) -> usize {
        self.n
    }
    fn bulk(&self, r: f64, t: f64) -> (f64, f64) {
        let s = 1.0 - t / self.radius;
        let sigma = self.boundary(r);
        (s.powi(self.n as i32 - 3) * sigma, s.powi(self.n as i32 - 1) * sigma)
    }
    fn boundary(&self, r: f64) -> f64 {
        let x = r / self.radius;
        if x == 0.0 {
            1.0
        } else {
            (x.sin() / x).powi(self.n as i32 - 2)
        }
    }
    fn mean_curvature(&self) -> f64 {
        (self.n as f64 - 1.0) / self.radius
    }
    fn ambient_scal(&self) -> f64 {
        0.0
    }
    fn chart_radius(&self) -> f64 {
        self.radius.abs()
    }
    fn bulk_excess(&self, r: f64, t: f64) -> (f64, f64) {
        let ls = (-t / self.radius).ln_1p();
        let lsig = (self.n as f64 - 2.0) * ln_sinc(r / self.radius);
        let nf = self.n as f64;
        (((nf - 3.0) * ls + lsig).exp_m1(), ((nf - 1.0) * ls + lsig).exp_m1())
    }
    fn boundary_excess(&self, r: f64) -> f64 {
        ((self.n as f64 - 2.0) * ln_sinc(r / self.radius)).exp_m1()
    }
}

/// Curvature data at an interior point (normal coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteriorPointData {
    pub n: usize,
    /// Ricci tensor, n×n.
    pub ricci: Vec<Vec<f64>>,
}

impl InteriorPointData {
    pub fn flat(n: usize) -> Self {
        Self { n, ricci: vec![vec![0.0; n]; n] }
    }

    /// Round sphere of sectional curvature `k`: Ric = (n-1)k δ, Scal = n(n-1)k.
    pub fn round(n: usize, k: f64) -> Self {
        let mut d = Self::flat(n);
        for i in 0..n {
            d.ricci[i][i] = (n as f64 - 1.0) * k;
        }
        d
    }

    pub fn scal(&self) -> f64 {
        (0..self.n).map(|i| self.ricci[i][i]).sum()
    }

    /// Averaged normal-coordinate jet with the given chart radius.
    pub fn jet(&self, chart_radius: f64) -> Result<InteriorJet> {
        if !(chart_radius > 0.0) {
            return Err(invalid(format!("chart radius must be positive, got {chart_radius}")));
        }
        Ok(InteriorJet { n: self.n, volume: self.averaged_volume()?, scal: self.scal(), chart_radius })
    }

    /// Averaged volume density 1 - (1/6) Ric_ij x_i x_j as a polynomial in ρ.
    ///
    /// The radial contraction of g^{ij} is exactly 1 in normal coordinates, so this
    /// single weight multiplies every integrand of a radial profile.
    pub fn averaged_volume(&self) -> Result<Bivariate> {
        let n = self.n;
        if self.ricci.len() != n || self.ricci.iter().any(|r| r.len() != n) {
            return Err(invalid(format!("Ricci tensor must be {n}x{n}")));
        }
        let mut v = Poly::constant(n, 1.0);
        for i in 0..n {
            for j in 0..n {
                v.add_quadratic(i, j, -self.ricci[i][j] / 6.0);
            }
        }
        Ok(v.full_average())
    }
}

/// Radially averaged volume density around an interior point.
#[derive(Debug, Clone)]
pub struct InteriorJet {
    pub n: usize,
    /// Polynomial in ρ (first variable).
    pub volume: Bivariate,
    pub scal: f64,
    pub chart_radius: f64,
}

impl InteriorJet {
    pub fn volume_at(&self, rho: f64) -> f64 {
        self.volume.eval(rho, 0.0)
    }

    pub fn volume_excess(&self, rho: f64) -> f64 {
        self.volume.eval_minus_one(rho, 0.0)
    }
}

/// Named model geometries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name", deny_unknown_fields)]
pub enum ModelGeometry {
    EuclideanBall {
        radius: f64,
    },
    FlatHalfspace,
    /// Umbilic boundary with II = H/(n-1) Id in flat surroundings.
    UmbilicSphereCap {
        mean_curvature: f64,
    },
    /// H = 0, II = diag(a, -a, 0, …) with |II̊|² = 2a².
    AnisotropicCylinderLike {
        amplitude: f64,
    },
    RicciOnly {
        ric_normal: f64,
    },
    BoundaryScalOnly {
        scal_boundary: f64,
    },
}

impl ModelGeometry {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "ball" | "euclidean-ball" => ModelGeometry::EuclideanBall { radius: 1.0 },
            "flat" | "flat-halfspace" => ModelGeometry::FlatHalfspace,
            "umbilic" | "h-only" | "umbilic-sphere-cap" => ModelGeometry::UmbilicSphereCap { mean_curvature: 1.0 },
            "anisotropic" | "anisotropic-cylinder-like" => {
                ModelGeometry::AnisotropicCylinderLike { amplitude: std::f64::consts::FRAC_1_SQRT_2 }
            }
            "ricci-only" => ModelGeometry::RicciOnly { ric_normal: 1.0 },
            "boundary-scal-only" | "scal-only" => ModelGeometry::BoundaryScalOnly { scal_boundary: 1.0 },
            other => return Err(invalid(format!("unknown geometry '{other}'"))),
        })
    }

    pub fn boundary_data(&self, n: usize) -> Result<BoundaryPointData> {
        if n < 2 {
            return Err(invalid(format!("dimension must be >= 2, got {n}")));
        }
        let m = n - 1;
        let d = match *self {
            ModelGeometry::EuclideanBall { radius } => {
                if !(radius > 0.0) {
                    return Err(invalid("ball radius must be positive"));
                }
                let mut d = BoundaryPointData::with_principal_curvatures(n, &vec![1.0 / radius; m]);
                if n >= 3 {
                    d.scal_boundary = (m * (m - 1)) as f64 / (radius * radius);
                }
                d
            }
            ModelGeometry::FlatHalfspace => BoundaryPointData::flat(n),
            ModelGeometry::UmbilicSphereCap { mean_curvature } => {
                BoundaryPointData::with_principal_curvatures(n, &vec![mean_curvature / m as f64; m])
            }
            ModelGeometry::AnisotropicCylinderLike { amplitude } => {
                if m < 2 {
                    return Err(invalid("anisotropic boundary needs n >= 3"));
                }
                BoundaryPointData::with_principal_curvatures(n, &[amplitude, -amplitude])
            }
            ModelGeometry::RicciOnly { ric_normal } => {
                let mut d = BoundaryPointData::flat(n);
                d.ric_normal = ric_normal;
                d
            }
            ModelGeometry::BoundaryScalOnly { scal_boundary } => {
                if n < 3 {
                    return Err(invalid("boundary scalar curvature needs n >= 3"));
                }
                let mut d = BoundaryPointData::flat(n);
                d.scal_boundary = scal_boundary;
                d
            }
        };
        Ok(d)
    }

    /// Exact chart metric when the catalog has one.
    pub fn exact_metric(&self, n: usize) -> Option<ExactBall> {
        match *self {
            ModelGeometry::EuclideanBall { radius } => Some(ExactBall { n, radius }),
            _ => None,
        }
    }
}

/// Per-channel breakdown of a linear curvature combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSum {
    pub total: f64,
    pub channels: Vec<(String, f64)>,
}

/// 𝔯 = κ₃|II̊|² + κ₁ Ric(ν,ν) + κ₂ Scal_∂.
pub fn renormalized_mass(data: &BoundaryPointData, constants: &crate::moments::EscobarConstants) -> Result<ChannelSum> {
    if data.n < 5 {
        return Err(invalid(format!("renormalized mass needs n >= 5, got {}", data.n)));
    }
    let (k1, k2) = match (constants.kappa1, constants.kappa2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(crate::Error::UnfitChannelConstants("kappa1/kappa2 not set".into())),
    };
    let k3 = constants
        .kappa3_effective
        .or(constants.kappa3)
        .ok_or_else(|| crate::Error::UnfitChannelConstants("kappa3 not set".into()))?;
    let channels = vec![
        ("ring_ii".to_string(), k3 * data.ring_norm2()),
        ("ric_normal".to_string(), k1 * data.ric_normal),
        ("scal_boundary".to_string(), k2 * data.scal_boundary),
    ];
    Ok(ChannelSum { total: channels.iter().map(|c| c.1).sum(), channels })
}

/// Θ = α₁ ∇_ν Ric(ν,ν) + α₂ ∇_ν Scal_∂ + α₃ ⟨∇_ν II̊, II̊⟩ + α₄ Δ_∂ H.
pub fn theta_coefficient(data: &BoundaryPointData, constants: &crate::moments::EscobarConstants) -> Result<ChannelSum> {
    let a = constants
        .third_order
        .ok_or_else(|| crate::Error::UnfitChannelConstants("third-order constants not configured".into()))?;
    let channels = vec![
        ("normal_derivative_ric_normal".to_string(), a[0] * data.normal_derivative_ric_normal),
        ("normal_derivative_scal_boundary".to_string(), a[1] * data.normal_derivative_scal_boundary),
        ("normal_derivative_traceless".to_string(), a[2] * data.normal_derivative_traceless),
        ("laplacian_mean_curvature".to_string(), a[3] * data.laplacian_mean_curvature),
    ];
    Ok(ChannelSum { total: channels.iter().map(|c| c.1).sum(), channels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_jet_is_identity() {
        let j = fermi_jet(&BoundaryPointData::flat(5), 2).unwrap();
        assert_eq!(j.volume, Poly::constant(5, 1.0));
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == b { Poly::constant(5, 1.0) } else { Poly::zero(5) };
                assert_eq!(j.g[a][b], want);
            }
        }
    }

    #[test]
    fn ball_volume_jet_matches_taylor_coefficients() {
        for n in 3..=7 {
            let d = ModelGeometry::EuclideanBall { radius: 1.0 }.boundary_data(n).unwrap();
            assert_eq!(d.h(), (n - 1) as f64);
            assert_eq!(d.ring_norm2(), 0.0);
            let j = fermi_jet(&d, 2).unwrap();
            let mut e = vec![0; n];
            e[n - 1] = 1;
            assert_eq!(j.volume.coeff(&e), -((n - 1) as f64));
            e[n - 1] = 2;
            let want = ((n - 1) * (n - 2)) as f64 / 2.0;
            assert!((j.volume.coeff(&e) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn order_outside_range_is_rejected() {
        assert!(fermi_jet(&BoundaryPointData::flat(4), 3).is_err());
    }

    #[test]
    fn asymmetric_form_is_rejected() {
        let mut d = BoundaryPointData::flat(3);
        d.second_fundamental_form[0][1] = 1.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn constant_curvature_default_contracts_to_scal() {
        let mut d = BoundaryPointData::flat(5);
        d.scal_boundary = 6.0;
        let ric = d.boundary_ricci();
        let tr: f64 = (0..4).map(|a| ric[a][a]).sum();
        assert!((tr - 6.0).abs() < 1e-13);
    }

    #[test]
    fn exact_ball_excess_matches_weights() {
        for radius in [1.0, -0.5] {
            let b = ExactBall { n: 5, radius };
            for (r, t) in [(0.01, 0.02), (0.3, 0.1), (1e-6, 1e-7)] {
                let (a, v) = b.bulk(r, t);
                let (ae, ve) = b.bulk_excess(r, t);
                assert!((a - 1.0 - ae).abs() < 1e-14 && (v - 1.0 - ve).abs() < 1e-14);
                assert!((b.boundary(r) - 1.0 - b.boundary_excess(r)).abs() < 1e-14);
            }
        }
    }
}
