//! Fast-diffusion entropy envelope and its ODE check, the extinction-time bound,
//! the eigenfunction competitor bound and small-window eigenvalue scaling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::loglog_slope;
use crate::moments::fde_exponents;
use crate::nodes::{gn_exponents, RadialNodes};
use crate::ode::{integrate, OdeOptions};
use crate::profiles::{check_gn_exponent, gn_ground_state};
use crate::quadrature::QuadSpec;
use crate::special::unit_sphere_area;

/// Source of the entropy/entropy-production constant C_{n,m}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EepConstant {
    /// Euclidean sharp GN constant raised to the power q, valid up to O(ε_*).
    EuclideanLeading,
    /// User-supplied value for an arbitrary manifold.
    Value { value: f64 },
}

/// Parameters of the Bernoulli-type entropy decay E' ≤ -κ E^{1/α}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub n: usize,
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eep_constant: f64,
    pub eep_source: EepConstant,
    pub e0: f64,
    pub m0: f64,
    /// κ = (m+1) C^{-1/α} M₀^{-β/α}.
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Euclidean-leading EEP constant C^eucl(n, q, r)^q.
///
/// The GN line ‖g‖_q ≤ C‖∇g‖₂^θ‖g‖_r^{1-θ} with q = 1 + 1/m, r = 1/m coincides with
/// the Weinstein functional of exponent p = 2 exactly when m = 1/2; other m need a
/// user-supplied constant.
pub fn euclidean_eep_constant(n: usize, m: f64) -> Result<f64> {
    if m != 0.5 {
        return Err(invalid(format!(
            "the Euclidean-leading EEP constant is available for m = 0.5 only (got m = {m}); supply the constant explicitly"
        )));
    }
    let ground = gn_ground_state(n, 2.0)?;
    Ok(RadialNodes::gn(&ground, 40.0, &QuadSpec::default())?.weinstein(2.0))
}

impl DecayParams {
    pub fn new(n: usize, m: f64, eep: EepConstant, e0: f64, m0: f64) -> Result<Self> {
        let ex = fde_exponents(n, m)?;
        if !ex.bernoulli {
            return Err(Error::NoBernoulliRegime { alpha: ex.alpha });
        }
        if !(e0 > 0.0) || !(m0 > 0.0) {
            return Err(invalid("initial entropy and mass must be positive"));
        }
        let mut warnings = Vec::new();
        let c = match eep {
            EepConstant::Value { value } if value > 0.0 => value,
            EepConstant::Value { value } => return Err(invalid(format!("EEP constant must be positive, got {value}"))),
            EepConstant::EuclideanLeading => {
                warnings.push("Euclidean-leading EEP constant; geometric corrections are O(eps_*)".into());
                euclidean_eep_constant(n, m)?
            }
        };
        if n >= 3 && ex.below_sobolev_line {
            warnings.push(format!("m = {m} lies below (n-2)/(n+2); the GN line leaves the Sobolev range"));
        }
        if 1.0 - ex.alpha < 1e-2 {
            warnings.push(format!("alpha = {} is close to 1: near-exponential regime", ex.alpha));
        }
        let kappa = (m + 1.0) * c.powf(-1.0 / ex.alpha) * m0.powf(-ex.beta / ex.alpha);
        Ok(Self { n, m, alpha: ex.alpha, beta: ex.beta, eep_constant: c, eep_source: eep, e0, m0, kappa, warnings })
    }

    /// Parameters with α and κ given directly.
    pub fn from_rate(alpha: f64, kappa: f64, e0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::NoBernoulliRegime { alpha });
        }
        if !(kappa > 0.0) || !(e0 > 0.0) {
            return Err(invalid("decay rate and initial entropy must be positive"));
        }
        Ok(Self {
            n: 0,
            m: f64::NAN,
            alpha,
            beta: f64::NAN,
            eep_constant: f64::NAN,
            eep_source: EepConstant::Value { value: f64::NAN },
            e0,
            m0: f64::NAN,
            kappa,
            warnings: Vec::new(),
        })
    }
}

/// (E₀^{-(1-α)/α} + ((1-α)/α) κ t)^{-α/(1-α)}.
pub fn decay_envelope(params: &DecayParams, t: f64) -> Result<f64> {
    let a = params.alpha;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::NoBernoulliRegime { alpha: a });
    }
    let r = (1.0 - a) / a;
    Ok((params.e0.powf(-r) + r * params.kappa * t).powf(-1.0 / r))
}

/// Comparison of the equality ODE with the closed-form envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub ode: Vec<f64>,
    pub envelope: Vec<f64>,
    /// sup |E_ode - envelope|.
    pub sup_gap: f64,
    /// sup (E_ode - envelope)⁺, the majorization violation.
    pub sup_excess: f64,
    /// For α = 1/2, sup |E_ode - (E₀⁻¹ + κt)⁻¹|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_closed_form_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Integrates E' = -κE^{1/α} on [0, horizon] and compares against the envelope at `samples` times.
pub fn ode_decay_check(params: &DecayParams, horizon: f64, samples: usize, opts: &OdeOptions) -> Result<DecayCheck> {
    if !(horizon > 0.0) || samples < 2 {
        return Err(invalid("horizon must be positive and at least two samples are needed"));
    }
    let p = 1.0 / params.alpha;
    let k = params.kappa;
    let times: Vec<f64> = (0..samples).map(|i| horizon * i as f64 / (samples - 1) as f64).collect();
    let mut ode = vec![params.e0];
    let mut y = [params.e0];
    for w in times.windows(2) {
        y = integrate(|_, e: &[f64; 1]| [-k * e[0].max(0.0).powf(p)], w[0], y, w[1], opts, |_, _| false)?.y;
        ode.push(y[0]);
    }
    let envelope = times.iter().map(|&t| decay_envelope(params, t)).collect::<Result<Vec<_>>>()?;
    let gaps = ode.iter().zip(&envelope).map(|(a, b)| a - b);
    let sup_gap = gaps.clone().fold(0.0f64, |m, g| m.max(g.abs()));
    let sup_excess = gaps.fold(0.0f64, |m, g| m.max(g));
    let half_closed_form_error = (params.alpha == 0.5)
        .then(|| times.iter().zip(&ode).map(|(t, e)| (e - 1.0 / (1.0 / params.e0 + k * t)).abs()).fold(0.0, f64::max));
    Ok(DecayCheck {
        horizon,
        times,
        ode,
        envelope,
        sup_gap,
        sup_excess,
        half_closed_form_error,
        warnings: params.warnings.clone(),
    })
}

/// y₀^{1-m} / ((1-m) λ₁).
pub fn extinction_time_lower(y0: f64, m: f64, lambda1: f64) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) {
        return Err(invalid(format!("extinction bound needs 0 < m < 1, got {m}")));
    }
    if !(lambda1 > 0.0) || !(y0 > 0.0) {
        return Err(invalid("extinction bound needs positive pairing and eigenvalue"));
    }
    Ok(y0.powf(1.0 - m) / ((1.0 - m) * lambda1))
}

/// Time at which y' = -λ₁ y^m, y(0) = y₀ reaches zero, by numerical integration.
///
/// The last positive state y_k is completed by the exact remaining time y_k^{1-m}/((1-m)λ₁)
/// of the autonomous equation.
pub fn extinction_witness(y0: f64, m: f64, lambda1: f64, opts: &OdeOptions) -> Result<f64> {
    extinction_time_lower(y0, m, lambda1)?;
    let mut last = (0.0, y0);
    let horizon = 10.0 * y0.powf(1.0 - m) / ((1.0 - m) * lambda1);
    let end = integrate(
        |_, y: &[f64; 1]| [-lambda1 * y[0].max(0.0).powf(m)],
        0.0,
        [y0],
        horizon,
        opts,
        |t, y| {
            if y[0] > 1e-6 * y0 {
                last = (t, y[0]);
                false
            } else {
                true
            }
        },
    )?;
    if !end.stopped {
        return Err(Error::Integration("extinction witness did not reach zero within the horizon".into()));
    }
    Ok(last.0 + last.1.powf(1.0 - m) / ((1.0 - m) * lambda1))
}

/// Vol^{1-(p+1)/2} λ₁^{-β/2}.
pub fn eig_competitor_bound(vol: f64, lambda1: f64, n: usize, p: f64) -> Result<f64> {
    check_gn_exponent(n, p)?;
    if !(vol > 0.0) || !(lambda1 > 0.0) {
        return Err(invalid("volume and eigenvalue must be positive"));
    }
    let (_, beta) = gn_exponents(n, p);
    Ok(vol.powf(1.0 - (p + 1.0) / 2.0) * lambda1.powf(-beta / 2.0))
}

/// Condition at the outer sphere r = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterCondition {
    /// u(1) = 0.
    Dirichlet,
    /// u'(1) = 0: the unit ball plays the role of the closed manifold around the window.
    Neumann,
}

/// Shooting result: does λ reach the first eigenvalue?
fn at_or_above_first(n: usize, d: f64, lambda: f64, outer: OuterCondition) -> Result<bool> {
    let nf = n as f64;
    // s = ln r, u_s = r^{2-n} w, w_s = -λ r^n u with w = r^{n-1} u'.
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-15, h0: 1e-4, ..Default::default() };
    let rhs = |s: f64, y: &[f64; 2]| {
        let r = s.exp();
        [r.powf(2.0 - nf) * y[1], -lambda * r.powf(nf) * y[0]]
    };
    let end = integrate(rhs, d.ln(), [0.0, 1.0], 0.0, &opts, |s, y| s > d.ln() && y[0] < 0.0)?;
    if end.stopped {
        return Ok(true);
    }
    Ok(match outer {
        OuterCondition::Dirichlet => end.y[0] <= 0.0,
        OuterCondition::Neumann => end.y[1] <= 0.0,
    })
}

fn at_or_above_first_disk(n: usize, lambda: f64) -> Result<bool> {
    let nf = n as f64;
    let r0 = 1e-3;
    let u0 = 1.0 - lambda * r0 * r0 / (2.0 * nf) + lambda * lambda * r0.powi(4) / (8.0 * nf * (nf + 2.0));
    let du0 = -lambda * r0 / nf + lambda * lambda * r0.powi(3) / (2.0 * nf * (nf + 2.0));
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-15, h0: 1e-4, ..Default::default() };
    let rhs = |r: f64, y: &[f64; 2]| [y[1], -(nf - 1.0) / r * y[1] - lambda * y[0]];
    let end = integrate(rhs, r0, [u0, du0], 1.0, &opts, |_, y| y[0] < 0.0)?;
    Ok(end.stopped || end.y[0] <= 0.0)
}

/// First radial eigenvalue of the Laplacian on {d < r < 1} ⊂ ℝⁿ with u(d) = 0 and the
/// given outer condition; d = 0 is the full ball with a regular center.
pub fn radial_lambda1(n: usize, d: f64, outer: OuterCondition, rel_tol: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("window eigenvalues need n >= 2, got {n}")));
    }
    if !(0.0..1.0).contains(&d) {
        return Err(invalid(format!("window radius must lie in [0, 1), got {d}")));
    }
    if d == 0.0 && outer == OuterCondition::Neumann {
        return Err(invalid("the full ball with a Neumann wall has a zero first eigenvalue"));
    }
    let test = |l: f64| if d == 0.0 { at_or_above_first_disk(n, l) } else { at_or_above_first(n, d, l, outer) };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut tries = 0;
    while !test(hi)? {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Bracket(format!("no sign change up to lambda = {hi}")));
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if test(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One rung of a window ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRung {
    pub d: f64,
    pub lambda1: f64,
    /// λ₁|log d| for n = 2, λ₁/d^{n-2} otherwise.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub n: usize,
    pub outer: OuterCondition,
    pub rungs: Vec<WindowRung>,
    /// |s_last - s_prev| / |s_last| for the scaled quantity.
    pub last_relative_change: f64,
    /// λ₁ increases as d increases.
    pub monotone: bool,
}

fn scaled_eigenvalue(n: usize, d: f64, lambda: f64) -> f64 {
    if n == 2 {
        lambda * d.ln().abs()
    } else {
        lambda / d.powi(n as i32 - 2)
    }
}

/// λ₁ along a ladder of window radii with the capacity scaling of the hole.
pub fn small_window_lambda1(n: usize, ladder: &[f64], outer: OuterCondition, rel_tol: f64) -> Result<WindowReport> {
    if !(n == 2 || n == 3) {
        return Err(invalid(format!("window scaling is implemented for n = 2 or 3, got {n}")));
    }
    if ladder.is_empty() {
        return Err(invalid("the window ladder is empty"));
    }
    if let Some(d) = ladder.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(invalid(format!("window radius must lie in (0, 1), got {d}")));
    }
    let rungs = ladder
        .par_iter()
        .map(|&d| {
            let lambda1 = radial_lambda1(n, d, outer, rel_tol)?;
            Ok(WindowRung { d, lambda1, scaled: scaled_eigenvalue(n, d, lambda1) })
        })
        .collect::<Result<Vec<_>>>()?;
    let last_relative_change = match rungs.as_slice() {
        [.., a, b] => ((b.scaled - a.scaled) / b.scaled).abs(),
        _ => 0.0,
    };
    let mut sorted = rungs.clone();
    sorted.sort_by(|a, b| a.d.total_cmp(&b.d));
    let monotone = sorted.windows(2).all(|w| w[1].lambda1 > w[0].lambda1);
    Ok(WindowReport { n, outer, rungs, last_relative_change, monotone })
}

/// Parses "a:b" into the dyadic-in-decade ladder a, a/10, …, b.
pub fn parse_ladder(spec: &str) -> Result<Vec<f64>> {
    let (a, b) = spec.split_once(':').ok_or_else(|| invalid(format!("ladder '{spec}' must be 'start:end'")))?;
    let a: f64 = a.trim().parse().map_err(|_| invalid(format!("bad ladder start '{a}'")))?;
    let b: f64 = b.trim().parse().map_err(|_| invalid(format!("bad ladder end '{b}'")))?;
    if !(a > 0.0 && a < 1.0 && b > 0.0 && b <= a) {
        return Err(invalid(format!("ladder needs 1 > start >= end > 0, got {a}:{b}")));
    }
    let steps = (a / b).log10().round() as i32;
    Ok((0..=steps).map(|k| a * 10f64.powi(-k)).collect())
}

/// Divergence of the eigenfunction competitor bound along a window ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub n: usize,
    pub p: f64,
    pub beta: f64,
    pub d: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub bound: Vec<f64>,
    /// Slope of log bound against log d (n ≥ 3) or log|log d| (n = 2).
    pub fitted_exponent: f64,
    /// -β(n-2)/2 for n ≥ 3, β/2 for n = 2.
    pub expected_exponent: f64,
}

/// Chains the window eigenvalue into the competitor bound with Vol = |B₁ \ B_d|.
pub fn capacity_blowup_bound(n: usize, p: f64, ladder: &[f64], rel_tol: f64) -> Result<CapacityReport> {
    check_gn_exponent(n, p)?;
    let window = small_window_lambda1(n, ladder, OuterCondition::Neumann, rel_tol)?;
    let (_, beta) = gn_exponents(n, p);
    let ball = unit_sphere_area(n - 1) / n as f64;
    let d: Vec<f64> = window.rungs.iter().map(|r| r.d).collect();
    let lambda1: Vec<f64> = window.rungs.iter().map(|r| r.lambda1).collect();
    let bound = d
        .iter()
        .zip(&lambda1)
        .map(|(&d, &l)| eig_competitor_bound(ball * (1.0 - d.powi(n as i32)), l, n, p))
        .collect::<Result<Vec<_>>>()?;
    let (fitted_exponent, expected_exponent) = if d.len() < 2 {
        (f64::NAN, f64::NAN)
    } else if n == 2 {
        let logs: Vec<f64> = d.iter().map(|d| d.ln().abs()).collect();
        (loglog_slope(&logs, &bound)?, beta / 2.0)
    } else {
        (loglog_slope(&d, &bound)?, -beta * (n as f64 - 2.0) / 2.0)
    };
    Ok(CapacityReport { n, p, beta, d, lambda1, bound, fitted_exponent, expected_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_alpha_envelope_is_harmonic() {
        let p = DecayParams::from_rate(0.5, 1.0, 1.0).unwrap();
        for t in [0.0, 1.0, 10.0] {
            assert!((decay_envelope(&p, t).unwrap() - 1.0 / (1.0 + t)).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_outside_unit_interval_is_rejected() {
        assert!(matches!(DecayParams::from_rate(1.0, 1.0, 1.0), Err(Error::NoBernoulliRegime { .. })));
        assert!(matches!(
            DecayParams::new(3, 1.0 / 3.0, EepConstant::Value { value: 1.0 }, 1.0, 1.0),
            Err(Error::NoBernoulliRegime { .. })
        ));
    }

    #[test]
    fn extinction_arithmetic() {
        assert!((extinction_time_lower(1.0, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn competitor_bound_scaling() {
        let a = eig_competitor_bound(1.0, 2.0, 2, 3.0).unwrap();
        let b = eig_competitor_bound(1.0, 1.0, 2, 3.0).unwrap();
        assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ladder_parsing() {
        let l = parse_ladder("1e-2:1e-5").unwrap();
        assert_eq!(l.len(), 4);
        assert!((l[3] - 1e-5).abs() < 1e-20);
        assert!(parse_ladder("1e-5:1e-2").is_err());
    }
}
