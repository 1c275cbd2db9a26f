//! Weighted moments of the model profiles and the closed-form coefficients built
//! from them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nodes::{gn_exponents, HalfspaceNodes, RadialNodes};
use crate::profiles::{ProfileKind, RadialProfile};
use crate::quadrature::QuadSpec;

/// Critical boundary trace exponent q = 2(n-1)/(n-2).
pub fn trace_exponent(n: usize) -> f64 {
    2.0 * (n as f64 - 1.0) / (n as f64 - 2.0)
}

/// Moment values of one truncation level (or of the untruncated profile).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentValues {
    /// ∫|∇v|².
    pub dirichlet: f64,
    /// ∫ y_n |∇v|².
    pub first: f64,
    /// ∫ y_n |∇_tan v|².
    pub first_tan: f64,
    /// ∫_{∂} v².
    pub trace_l2: f64,
    /// ∫_{∂} |v|^q.
    pub trace_q: f64,
    /// ∫ y_n² |∇v|²; absent when it diverges.
    pub second: Option<f64>,
    /// ∫ y_n² |∇_tan v|²; absent when it diverges.
    pub second_tan: Option<f64>,
    /// ∫ v²; absent when it diverges.
    pub bulk_l2: Option<f64>,
}

impl MomentValues {
    fn from_nodes(nodes: &HalfspaceNodes, keep_second: bool, keep_l2: bool) -> Self {
        let q = trace_exponent(nodes.n);
        let mut s = [0.0f64; 6];
        for b in &nodes.bulk {
            let g2 = b.grad2();
            let tan = b.vr * b.vr;
            s[0] += b.w * g2;
            s[1] += b.w * b.t * g2;
            s[2] += b.w * b.t * tan;
            s[3] += b.w * b.t * b.t * g2;
            s[4] += b.w * b.t * b.t * tan;
            s[5] += b.w * b.v * b.v;
        }
        Self {
            dirichlet: s[0],
            first: s[1],
            first_tan: s[2],
            trace_l2: nodes.boundary_power(2.0),
            trace_q: nodes.boundary_power(q),
            second: keep_second.then_some(s[3]),
            second_tan: keep_second.then_some(s[4]),
            bulk_l2: keep_l2.then_some(s[5]),
        }
    }

    fn abs_diff(&self, other: &Self) -> Self {
        let d = |a: f64, b: f64| (a - b).abs();
        let od = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(x, y)| (x - y).abs());
        Self {
            dirichlet: d(self.dirichlet, other.dirichlet),
            first: d(self.first, other.first),
            first_tan: d(self.first_tan, other.first_tan),
            trace_l2: d(self.trace_l2, other.trace_l2),
            trace_q: d(self.trace_q, other.trace_q),
            second: od(self.second, other.second),
            second_tan: od(self.second_tan, other.second_tan),
            bulk_l2: od(self.bulk_l2, other.bulk_l2),
        }
    }

    /// The seven named moments as (name, value) pairs; divergent entries are `None`.
    pub fn named(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("dirichlet", Some(self.dirichlet)),
            ("first", Some(self.first)),
            ("first_tan", Some(self.first_tan)),
            ("trace_l2", Some(self.trace_l2)),
            ("trace_q", Some(self.trace_q)),
            ("second", self.second),
            ("second_tan", self.second_tan),
        ]
    }

    /// (2/(n-1)) ∫y_n|∇_tan v|² - ∫y_n|∇v|² + ((n-2)/2) ∫_∂ v², the linear H-coefficient
    /// of the covariant energy numerator.
    pub fn linear_bracket(&self, n: usize) -> f64 {
        let nf = n as f64;
        2.0 / (nf - 1.0) * self.first_tan - self.first + (nf - 2.0) / 2.0 * self.trace_l2
    }

    /// S*(R) = 𝔍 / 𝔗^{2/q}.
    pub fn sobolev_ratio(&self, n: usize) -> f64 {
        self.dirichlet / self.trace_q.powf(2.0 / trace_exponent(n))
    }
}

/// Moments of the truncated optimizer χ_R U₊ and of U₊ itself, each with a
/// quadrature error estimate from a doubled rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentTable {
    pub n: usize,
    pub radius: f64,
    pub quadrature: QuadSpec,
    pub at_cutoff: MomentValues,
    pub at_cutoff_error: MomentValues,
    pub extrapolated: MomentValues,
    pub extrapolated_error: MomentValues,
}

impl MomentTable {
    /// Extrapolated ∫ y_n² |∇U₊|², or the log-divergence error in n = 4.
    pub fn second(&self) -> Result<f64> {
        self.extrapolated.second.ok_or(Error::LogDivergentMoment { n: self.n })
    }

    pub fn second_tan(&self) -> Result<f64> {
        self.extrapolated.second_tan.ok_or(Error::LogDivergentMoment { n: self.n })
    }
}

/// Computes the moment table of an Escobar half-space optimizer at cutoff radius `radius`.
///
/// The untruncated values integrate the exterior of a disk through the inversion
/// ρ = ρ₀/u, so they carry no cutoff tail.
pub fn weighted_moments(profile: &RadialProfile, radius: f64, spec: &QuadSpec) -> Result<MomentTable> {
    if profile.kind != ProfileKind::EscobarHalfspace {
        return Err(invalid("moment tables need the Escobar half-space optimizer"));
    }
    let n = profile.n;
    if n < 4 {
        return Err(Error::MomentDivergentDimension { n, min: 4 });
    }
    if !(radius >= 1.0) || !radius.is_finite() {
        return Err(invalid(format!("cutoff radius must be >= 1, got {radius}")));
    }
    let fine = spec.doubled();
    let finite_second = n >= 5;
    let finite_l2 = n >= 5;
    let ((cut, cut_fine), (full, full_fine)) = rayon::join(
        || {
            rayon::join(
                || MomentValues::from_nodes(&HalfspaceNodes::escobar_truncated(profile, radius, spec), true, true),
                || MomentValues::from_nodes(&HalfspaceNodes::escobar_truncated(profile, radius, &fine), true, true),
            )
        },
        || {
            rayon::join(
                || MomentValues::from_nodes(&HalfspaceNodes::escobar_full(profile, spec), finite_second, finite_l2),
                || MomentValues::from_nodes(&HalfspaceNodes::escobar_full(profile, &fine), finite_second, finite_l2),
            )
        },
    );
    Ok(MomentTable {
        n,
        radius,
        quadrature: *spec,
        at_cutoff: cut_fine,
        at_cutoff_error: cut.abs_diff(&cut_fine),
        extrapolated: full_fine,
        extrapolated_error: full.abs_diff(&full_fine),
    })
}

/// Residuals of an identity check, relative to the reference moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub tolerance: f64,
    /// (label, relative residual) pairs.
    pub residuals: Vec<(String, f64)>,
    pub passed: bool,
}

impl IdentityReport {
    fn build(name: &str, tol: f64, residuals: Vec<(String, f64)>) -> Self {
        let passed = residuals.iter().all(|(_, r)| r.abs() <= tol);
        Self { name: name.to_string(), tolerance: tol, residuals, passed }
    }

    /// Converts a failed report into an error.
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::IdentityViolation(format!("{}: {:?}", self.name, self.residuals)))
        }
    }
}

/// Checks ∫y_n|∇U₊|² = Θ/2 and ∫y_n|∇_tan U₊|² = Θ/4 on the extrapolated values.
pub fn verify_harmonic_identities(table: &MomentTable, tol: f64) -> Result<IdentityReport> {
    if table.n < 4 {
        return Err(Error::MomentDivergentDimension { n: table.n, min: 4 });
    }
    let m = &table.extrapolated;
    let theta = m.trace_l2;
    Ok(IdentityReport::build(
        "harmonic first moments",
        tol,
        vec![
            ("first - theta/2".into(), (m.first - theta / 2.0) / theta),
            ("first_tan - theta/4".into(), (m.first_tan - theta / 4.0) / theta),
        ],
    ))
}

/// Checks ∫y_n²|∇_tan U₊|² = ½ ∫y_n²|∇U₊|² on the extrapolated values.
pub fn second_moment_identity(table: &MomentTable, tol: f64) -> Result<IdentityReport> {
    if table.n < 5 {
        return Err(Error::LogDivergentMoment { n: table.n });
    }
    let g2 = table.second()?;
    let g2t = table.second_tan()?;
    Ok(IdentityReport::build("second moments", tol, vec![("second_tan - second/2".into(), (g2t - g2 / 2.0) / g2)]))
}

/// Dimensional constants of the Escobar expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscobarConstants {
    pub n: usize,
    pub q: f64,
    /// 4(n-1)/(n-2).
    pub a_n: f64,
    /// Sharp half-space constant 𝔍/𝔗^{2/q}.
    pub s_star: f64,
    pub theta: f64,
    /// First-order conformal coefficient, closed form (n-2)²Θ/(2(n-1)).
    pub rho_conf: f64,
    /// Same coefficient from the bracket of first moments.
    pub rho_conf_bracket: f64,
    /// First-order plain-trace coefficient Θ/2.
    pub rho_plain: f64,
    pub second_moment: Option<f64>,
    /// (4-n)/(2(n-1)) ∫y_n²|∇U₊|², the gradient part of the |II̊|² weight.
    pub kappa3: Option<f64>,
    /// Weight (n-2)/(4(n-1)) ∫U₊² multiplying the ambient scalar curvature.
    pub scal_weight: Option<f64>,
    /// |II̊|² weight as fitted from an anisotropic jet.
    #[serde(default)]
    pub kappa3_effective: Option<f64>,
    #[serde(default)]
    pub kappa1: Option<f64>,
    #[serde(default)]
    pub kappa2: Option<f64>,
    /// Interaction constant of the reduced functional (model units).
    pub c_conf: f64,
    /// Third-order channel weights α₁..α₄.
    #[serde(default)]
    pub third_order: Option<[f64; 4]>,
}

/// Fills the Escobar constants from an extrapolated table.
///
/// Fails when the bracket and closed forms of the first-order coefficient differ
/// by more than `tol` relative.
pub fn escobar_constants(n: usize, table: &MomentTable, tol: f64) -> Result<EscobarConstants> {
    if table.n != n {
        return Err(invalid(format!("table dimension {} differs from n = {n}", table.n)));
    }
    let nf = n as f64;
    let m = &table.extrapolated;
    let q = trace_exponent(n);
    let theta = m.trace_l2;
    let closed = (nf - 2.0).powi(2) * theta / (2.0 * (nf - 1.0));
    let bracket = m.linear_bracket(n) / m.dirichlet;
    let rel = (bracket - closed).abs() / closed;
    if rel > tol {
        return Err(Error::IdentityViolation(format!(
            "first-order coefficient: bracket {bracket} vs closed form {closed} (relative {rel:e})"
        )));
    }
    let g2 = m.second;
    Ok(EscobarConstants {
        n,
        q,
        a_n: 4.0 * (nf - 1.0) / (nf - 2.0),
        s_star: m.sobolev_ratio(n),
        theta,
        rho_conf: closed,
        rho_conf_bracket: bracket,
        rho_plain: theta / 2.0,
        second_moment: g2,
        kappa3: g2.map(|g| (4.0 - nf) * g / (2.0 * (nf - 1.0))),
        scal_weight: m.bulk_l2.map(|l2| (nf - 2.0) / (4.0 * (nf - 1.0)) * l2 / m.dirichlet),
        kappa3_effective: None,
        kappa1: None,
        kappa2: None,
        c_conf: 1.0,
        third_order: None,
    })
}

/// Coefficients of a fixed-cutoff sweep: the truncated profile is not exactly
/// optimal, so the flat quotient and the linear coefficient depend on R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConstants {
    pub radius: f64,
    pub s_star: f64,
    pub rho_conf: f64,
    pub rho_plain: f64,
    /// Flat plain-trace quotient 𝔗/𝔍^{q/2}.
    pub s_trace: f64,
}

pub fn cutoff_constants(table: &MomentTable) -> CutoffConstants {
    let n = table.n;
    let m = &table.at_cutoff;
    let q = trace_exponent(n);
    let nf = n as f64;
    CutoffConstants {
        radius: table.radius,
        s_star: m.sobolev_ratio(n),
        rho_conf: m.linear_bracket(n) / m.dirichlet,
        rho_plain: -(q / 2.0) * (2.0 / (nf - 1.0) * m.first_tan - m.first) / m.dirichlet,
        s_trace: m.trace_q / m.dirichlet.powf(q / 2.0),
    }
}

/// Gagliardo–Nirenberg profile moments and curvature coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnCoefficients {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
    /// Euclidean sharp constant W(Q).
    pub c_star: f64,
    pub i_p1: f64,
    pub i_2: f64,
    pub j_grad: f64,
    /// Normalized second moments (1/(n I)) ∫|y|² (…).
    pub m_p1: f64,
    pub m_2: f64,
    pub m_grad: f64,
    /// Shift of the half-space profile and its Weinstein quotient.
    pub shift: f64,
    pub halfspace_quotient: f64,
    /// Normalized first vertical moments of the half-space profile.
    pub m1_p1: f64,
    pub m1_2: f64,
    pub m1_grad: f64,
    pub m1_grad_tan: f64,
    /// Relative boundary coefficient: W/W₀ - 1 ≈ κ^bdy H ε.
    pub kappa_bdy: f64,
    /// Relative interior coefficient: 1 - W/W₀ ≈ κ^int Scal ε².
    pub kappa_int: f64,
    /// Deficit coefficients: C* - W ≈ (const) + kappa_bdy_deficit H ε on the boundary.
    pub kappa_bdy_deficit: f64,
    /// C* - W ≈ kappa_int_deficit Scal ε² in the interior.
    pub kappa_int_deficit: f64,
    /// Largest relative change of any moment under a doubled rule.
    pub quadrature_error: f64,
}

struct GnRaw {
    i_p1: f64,
    i_2: f64,
    j: f64,
    m_p1: f64,
    m_2: f64,
    m_grad: f64,
    w: f64,
    h_p1: f64,
    h_2: f64,
    h_j: f64,
    m1_p1: f64,
    m1_2: f64,
    m1_grad: f64,
    m1_grad_tan: f64,
}

impl GnRaw {
    fn compute(ground: &RadialProfile, half: &RadialProfile, p: f64, radius: f64, spec: &QuadSpec) -> Result<Self> {
        let n = ground.n;
        let nf = n as f64;
        let rad = RadialNodes::gn(ground, radius, spec)?;
        let hs = HalfspaceNodes::gn(half, radius, spec)?;
        let mut s = [0.0f64; 6];
        for x in &rad.nodes {
            let r2 = x.rho * x.rho;
            let vp = x.v.abs().powf(p + 1.0);
            let v2 = x.v * x.v;
            let g2 = x.dv * x.dv;
            s[0] += x.w * vp;
            s[1] += x.w * v2;
            s[2] += x.w * g2;
            s[3] += x.w * r2 * vp;
            s[4] += x.w * r2 * v2;
            s[5] += x.w * r2 * g2;
        }
        let mut h = [0.0f64; 7];
        for b in &hs.bulk {
            let vp = b.v.abs().powf(p + 1.0);
            let v2 = b.v * b.v;
            let g2 = b.grad2();
            h[0] += b.w * vp;
            h[1] += b.w * v2;
            h[2] += b.w * g2;
            h[3] += b.w * b.t * vp;
            h[4] += b.w * b.t * v2;
            h[5] += b.w * b.t * g2;
            h[6] += b.w * b.t * b.vr * b.vr;
        }
        let (a, bexp) = gn_exponents(n, p);
        Ok(Self {
            i_p1: s[0],
            i_2: s[1],
            j: s[2],
            m_p1: s[3] / (nf * s[0]),
            m_2: s[4] / (nf * s[1]),
            m_grad: s[5] / (nf * s[2]),
            w: h[0] / (h[1].powf(a / 2.0) * h[2].powf(bexp / 2.0)),
            h_p1: h[0],
            h_2: h[1],
            h_j: h[2],
            m1_p1: h[3] / h[0],
            m1_2: h[4] / h[1],
            m1_grad: h[5] / h[2],
            m1_grad_tan: h[6] / h[2],
        })
    }

    fn values(&self) -> [f64; 13] {
        [
            self.i_p1,
            self.i_2,
            self.j,
            self.m_p1,
            self.m_2,
            self.m_grad,
            self.h_p1,
            self.h_2,
            self.h_j,
            self.m1_p1,
            self.m1_2,
            self.m1_grad,
            self.m1_grad_tan,
        ]
    }
}

/// Computes the GN moments of the ground state `ground` and the half-space
/// profile `half` under the cutoff χ_R.
pub fn gn_coefficients(
    ground: &RadialProfile,
    half: &RadialProfile,
    radius: f64,
    spec: &QuadSpec,
) -> Result<GnCoefficients> {
    if ground.kind != ProfileKind::GnGroundState || half.kind != ProfileKind::GnHalfspaceNearOptimizer {
        return Err(invalid("GN coefficients need a ground state and a half-space near-optimizer"));
    }
    if ground.n != half.n {
        return Err(invalid("ground state and half-space profile dimensions differ"));
    }
    let p = ground.exponent.ok_or_else(|| invalid("ground state has no exponent"))?;
    let n = ground.n;
    let (coarse, fine) = rayon::join(
        || GnRaw::compute(ground, half, p, radius, spec),
        || GnRaw::compute(ground, half, p, radius, &spec.doubled()),
    );
    let (coarse, g) = (coarse?, fine?);
    let quadrature_error = coarse.values().iter().zip(g.values()).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    for (name, v) in ["I_{p+1}", "I_2", "J", "M_{p+1}", "M_2", "M_grad"].iter().zip(g.values()) {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::QuadratureNonConvergence { what: (*name).to_string(), change: quadrature_error });
        }
    }
    if quadrature_error > 1e-6 {
        let worst = [
            "I_{p+1}",
            "I_2",
            "J",
            "M_{p+1}",
            "M_2",
            "M_grad",
            "I+_{p+1}",
            "I+_2",
            "J+",
            "m1_{p+1}",
            "m1_2",
            "m1_grad",
            "m1_grad_tan",
        ]
        .iter()
        .zip(coarse.values().iter().zip(g.values()))
        .max_by(|a, b| {
            let ra = ((a.1 .0 - a.1 .1) / a.1 .1).abs();
            let rb = ((b.1 .0 - b.1 .1) / b.1 .1).abs();
            ra.total_cmp(&rb)
        })
        .map(|x| x.0.to_string())
        .unwrap_or_default();
        return Err(Error::QuadratureNonConvergence { what: worst, change: quadrature_error });
    }
    let (alpha, beta) = gn_exponents(n, p);
    let nf = n as f64;
    let c_star = g.i_p1 / (g.i_2.powf(alpha / 2.0) * g.j.powf(beta / 2.0));
    let kappa_int = (g.m_p1 - alpha / 2.0 * g.m_2 - beta / 2.0 * g.m_grad) / 6.0;
    let kappa_bdy = -g.m1_p1 + alpha / 2.0 * g.m1_2 - beta / 2.0 * (2.0 / (nf - 1.0) * g.m1_grad_tan - g.m1_grad);
    Ok(GnCoefficients {
        n,
        p,
        alpha,
        beta,
        radius,
        c_star,
        i_p1: g.i_p1,
        i_2: g.i_2,
        j_grad: g.j,
        m_p1: g.m_p1,
        m_2: g.m_2,
        m_grad: g.m_grad,
        shift: half.shift.unwrap_or(0.0),
        halfspace_quotient: g.w,
        m1_p1: g.m1_p1,
        m1_2: g.m1_2,
        m1_grad: g.m1_grad,
        m1_grad_tan: g.m1_grad_tan,
        kappa_bdy,
        kappa_int,
        kappa_bdy_deficit: -g.w * kappa_bdy,
        kappa_int_deficit: c_star * kappa_int,
        quadrature_error,
    })
}

/// Exponents of the fast-diffusion entropy inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdeExponents {
    pub n: usize,
    pub m: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// α ∈ (0, 1), so that the entropy obeys a Bernoulli-type decay.
    pub bernoulli: bool,
    /// m < (n-2)/(n+2) for n ≥ 3: the GN line leaves the Sobolev range.
    pub below_sobolev_line: bool,
}

pub fn fde_exponents(n: usize, m: f64) -> Result<FdeExponents> {
    if n < 1 {
        return Err(invalid("dimension must be positive"));
    }
    if !(m > 0.0 && m < 1.0) {
        return Err(invalid(format!("fast-diffusion exponent must lie in (0, 1), got {m}")));
    }
    let nf = n as f64;
    let denom = 2.0 * m * nf + (2.0 - nf);
    if denom <= 0.0 {
        return Err(invalid(format!("2mn + 2 - n must be positive, got {denom} for n = {n}, m = {m}")));
    }
    let alpha = m * nf / denom;
    let beta = (m * (nf + 2.0) + (2.0 - nf)) / denom;
    Ok(FdeExponents {
        n,
        m,
        theta: m * nf / (m * nf + 2.0),
        alpha,
        beta,
        bernoulli: alpha > 0.0 && alpha < 1.0 - 1e-12,
        below_sobolev_line: n >= 3 && m < (nf - 2.0) / (nf + 2.0),
    })
}
