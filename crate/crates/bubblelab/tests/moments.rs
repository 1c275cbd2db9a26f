//! Moment tables and derived constants against Beta-function closed forms.

mod common;

use approx::assert_relative_eq;
use bubblelab::moments::{
    escobar_constants, fde_exponents, second_moment_identity, trace_exponent, verify_harmonic_identities,
    weighted_moments, MomentTable,
};
use bubblelab::profiles::escobar_halfspace_optimizer;
use bubblelab::quadrature::QuadSpec;
use bubblelab::Error;
use common::{beta_half, radial_power_integral, sphere_area};
use proptest::prelude::*;

fn table(n: usize, radius: f64) -> MomentTable {
    weighted_moments(&escobar_halfspace_optimizer(n).unwrap(), radius, &QuadSpec::default()).unwrap()
}

/// Sharp trace constant (n-2)/2 |S^{n-1}|^{1/(n-1)}.
fn sharp_trace_constant(n: usize) -> f64 {
    (n as f64 - 2.0) / 2.0 * sphere_area(n).powf(1.0 / (n as f64 - 1.0))
}

/// ∫_{∂} U₊² with U₊ normalized to unit energy.
fn trace_l2_oracle(n: usize) -> f64 {
    let energy = (n as f64 - 2.0) * radial_power_integral(n - 1, 0, n as f64 - 1.0);
    radial_power_integral(n - 1, 0, n as f64 - 2.0) / energy
}

#[test]
fn sharp_constant_and_trace_mass() {
    for n in 4..=8 {
        let t = table(n, 25.0);
        let c = escobar_constants(n, &t, 1e-6).unwrap();
        assert_relative_eq!(c.s_star, sharp_trace_constant(n), max_relative = 1e-8);
        assert_relative_eq!(c.theta, trace_l2_oracle(n), max_relative = 1e-8);
        assert_relative_eq!(c.theta, 2.0 / (n as f64 - 3.0), max_relative = 1e-8);
        assert_relative_eq!(t.extrapolated.dirichlet, 1.0, max_relative = 1e-9);
    }
}

#[test]
fn beta_oracle_reproduces_trace_ratio() {
    for n in 4..=9 {
        let a = (n as f64 - 1.0) / 2.0;
        let ratio = beta_half(a, a - 1.0) / ((n as f64 - 2.0) * beta_half(a, a));
        assert_relative_eq!(ratio, 2.0 / (n as f64 - 3.0), max_relative = 1e-14);
    }
}

#[test]
fn harmonic_first_moments() {
    for n in 4..=7 {
        let t = table(n, 25.0);
        let r = verify_harmonic_identities(&t, 1e-8).unwrap();
        assert!(r.passed, "n = {n}: {:?}", r.residuals);
        let m = &t.extrapolated;
        assert_relative_eq!(m.first / m.trace_l2, 0.5, max_relative = 1e-8);
        assert_relative_eq!(m.first_tan / m.trace_l2, 0.25, max_relative = 1e-8);
    }
}

#[test]
fn truncation_converges_to_untruncated_values() {
    let t = table(6, 200.0);
    for ((name, cut), (_, full)) in t.at_cutoff.named().iter().zip(t.extrapolated.named().iter()) {
        let (cut, full) = (cut.unwrap(), full.unwrap());
        assert!((cut / full - 1.0).abs() < 1e-3, "{name}: {cut} vs {full}");
    }
}

#[test]
fn second_moment_diverges_in_four_dimensions() {
    let t = table(4, 25.0);
    assert!(matches!(t.second(), Err(Error::LogDivergentMoment { n: 4 })));
    assert!(matches!(second_moment_identity(&t, 1e-6), Err(Error::LogDivergentMoment { n: 4 })));
    let c = escobar_constants(4, &t, 1e-6).unwrap();
    assert!(c.kappa3.is_none() && c.second_moment.is_none());
}

#[test]
fn second_moment_identity_and_kappa3() {
    let t = table(5, 25.0);
    assert!(second_moment_identity(&t, 1e-7).unwrap().passed);
    let c = escobar_constants(5, &t, 1e-6).unwrap();
    let g2 = c.second_moment.unwrap();
    assert_relative_eq!(c.kappa3.unwrap() / g2, -1.0 / 8.0, max_relative = 1e-14);
}

#[test]
fn conformal_coefficient_closed_form() {
    for n in 4..=8 {
        let c = escobar_constants(n, &table(n, 25.0), 1e-6).unwrap();
        let nf = n as f64;
        assert_relative_eq!(c.rho_conf, (nf - 2.0).powi(2) * c.theta / (2.0 * (nf - 1.0)), max_relative = 1e-14);
        assert_relative_eq!(c.rho_conf_bracket, c.rho_conf, max_relative = 1e-7);
        assert_relative_eq!(c.rho_plain, c.theta / 2.0, max_relative = 1e-14);
    }
    let c4 = escobar_constants(4, &table(4, 25.0), 1e-6).unwrap();
    assert_relative_eq!(c4.rho_conf / c4.theta, 2.0 / 3.0, max_relative = 1e-14);
}

#[test]
fn tampered_tables_fail_identities() {
    let mut t = table(5, 25.0);
    t.extrapolated.first *= 1.01;
    let r = verify_harmonic_identities(&t, 1e-6).unwrap();
    assert!(!r.passed);
    assert!(matches!(r.into_result(), Err(Error::IdentityViolation(_))));
    assert!(matches!(escobar_constants(5, &t, 1e-6), Err(Error::IdentityViolation(_))));

    let mut t = table(5, 25.0);
    t.extrapolated.second_tan = t.extrapolated.second_tan.map(|v| v * 1.01);
    assert!(!second_moment_identity(&t, 1e-6).unwrap().passed);
    assert!(escobar_constants(6, &t, 1e-6).is_err());
}

#[test]
fn moment_tables_reject_low_dimensions_and_small_radii() {
    let u = escobar_halfspace_optimizer(5).unwrap();
    assert!(weighted_moments(&u, 0.5, &QuadSpec::default()).is_err());
    assert!(matches!(escobar_halfspace_optimizer(3), Err(Error::MomentDivergentDimension { .. })));
}

#[test]
fn fast_diffusion_exponents() {
    let e = fde_exponents(3, 0.9).unwrap();
    assert_relative_eq!(e.alpha, 2.7 / 4.4, max_relative = 1e-14);
    assert!(e.bernoulli);
    let e = fde_exponents(3, 1.0 / 3.0).unwrap();
    assert!(!e.bernoulli);
    for k in 1..10 {
        let e = fde_exponents(2, k as f64 / 10.0).unwrap();
        assert_eq!(e.alpha, 0.5);
    }
    assert!(fde_exponents(3, 0.1).is_err());
    assert!(fde_exponents(3, 0.0).is_err());
    assert!(!fde_exponents(3, 0.7).unwrap().below_sobolev_line);
    assert!(fde_exponents(5, 0.4).unwrap().below_sobolev_line);
}

proptest! {
    #[test]
    fn trace_exponent_is_conjugate(n in 3usize..40) {
        let q = trace_exponent(n);
        let nf = n as f64;
        prop_assert!((q - 2.0 * (nf - 1.0) / (nf - 2.0)).abs() < 1e-14);
        prop_assert!(q > 2.0 && q <= 4.0);
    }

    #[test]
    fn fde_exponent_relations(n in 1usize..8, m in 0.01f64..0.99) {
        let nf = n as f64;
        if let Ok(e) = fde_exponents(n, m) {
            prop_assert!(2.0 * m * nf + 2.0 - nf > 0.0);
            let denom = 2.0 * m * nf + 2.0 - nf;
            prop_assert!(((e.beta - e.alpha) * denom - (2.0 * m + 2.0 - nf)).abs() < 1e-12 * (1.0 + nf));
            prop_assert!(e.theta > 0.0 && e.theta < 1.0);
        } else {
            prop_assert!(2.0 * m * nf + 2.0 - nf <= 0.0);
        }
    }
}
