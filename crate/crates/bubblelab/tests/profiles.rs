//! Model profiles against closed-form normalizations and asymptotics.

mod common;

use approx::assert_relative_eq;
use bubblelab::fit::loglog_slope;
use bubblelab::nodes::RadialNodes;
use bubblelab::profiles::{
    aubin_talenti, cutoff, escobar_halfspace_optimizer, gn_ground_state, gn_halfspace_near_optimizer_from, gn_residual,
    RadialProfile,
};
use bubblelab::quadrature::QuadSpec;
use common::{radial_power_integral, sphere_area};
use proptest::prelude::*;

/// ∫_{ℝⁿ₊} |∇(|y'|² + (1+y_n)²)^{-(n-2)/2}|² = (n-2) |S^{n-2}| ½B((n-1)/2, (n-1)/2).
fn escobar_raw_energy(n: usize) -> f64 {
    (n as f64 - 2.0) * radial_power_integral(n - 1, 0, n as f64 - 1.0)
}

/// ∫_{ℝⁿ} |∇(1 + |y|²)^{-(n-2)/2}|² = (n-2)² ∫ |y|² (1+|y|²)^{-n}.
fn aubin_talenti_raw_energy(n: usize) -> f64 {
    (n as f64 - 2.0).powi(2) * radial_power_integral(n, 1, n as f64)
}

#[test]
fn escobar_amplitude_matches_beta_function_normalization() {
    for n in 4..=8 {
        let u = escobar_halfspace_optimizer(n).unwrap();
        assert_relative_eq!(u.amplitude, escobar_raw_energy(n).powf(-0.5), max_relative = 1e-10);
        assert_relative_eq!(u.value_at(&vec![0.0; n]), u.amplitude, max_relative = 1e-15);
    }
}

#[test]
fn escobar_decays_like_fundamental_solution() {
    for n in 4..=7 {
        let u = escobar_halfspace_optimizer(n).unwrap();
        let rs = [1e3, 2e3, 4e3, 8e3];
        let vs: Vec<f64> = rs.iter().map(|&r| u.half(r, 0.0).v).collect();
        let slope = loglog_slope(&rs, &vs).unwrap();
        assert!((slope + (n as f64 - 2.0)).abs() < 1e-3, "n = {n}: slope {slope}");
    }
}

#[test]
fn aubin_talenti_normalization_and_dilation() {
    for n in 3..=6 {
        let u = aubin_talenti(n, 1.0, &[]).unwrap();
        assert_relative_eq!(u.amplitude, aubin_talenti_raw_energy(n).powf(-0.5), max_relative = 1e-10);
        let lambda = 3.0;
        let v = aubin_talenti(n, lambda, &[]).unwrap();
        let a = (n as f64 - 2.0) / 2.0;
        for rho in [0.0, 0.3, 1.0, 5.0] {
            assert_relative_eq!(v.radial(rho).0, lambda.powf(a) * u.radial(lambda * rho).0, max_relative = 1e-12);
        }
    }
}

#[test]
fn aubin_talenti_is_centered() {
    let c = [1.0, -2.0, 0.5];
    let u = aubin_talenti(3, 2.0, &c).unwrap();
    let (v, g) = u.gradient_at(&c);
    assert_relative_eq!(v, u.amplitude * 2f64.sqrt(), max_relative = 1e-14);
    assert!(g.iter().all(|x| *x == 0.0));
    assert!(aubin_talenti(3, 1.0, &[0.0, 0.0]).is_err());
    assert!(aubin_talenti(3, -1.0, &[]).is_err());
}

#[test]
fn gn_ground_state_solves_the_ode_and_decreases() {
    for (n, p) in [(2, 3.0), (3, 3.0)] {
        let q = gn_ground_state(n, p).unwrap();
        let res = gn_residual(&q);
        assert!(res < 1e-6, "n = {n}: residual {res}");
        assert!(q.radial(0.0).0 > 1.0);
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let v = q.radial(k as f64 * 0.1).0;
            assert!(v > 0.0 && v < prev, "not decreasing at r = {}", k as f64 * 0.1);
            prev = v;
        }
    }
}

#[test]
fn gn_exponent_range_is_enforced() {
    assert!(gn_ground_state(3, 5.0).is_err());
    assert!(gn_ground_state(3, 1.0).is_err());
    assert!(gn_ground_state(2, 0.5).is_err());
}

#[test]
fn gn_near_optimizer_reaches_target_and_vanishes_on_boundary() {
    let ground = gn_ground_state(2, 3.0).unwrap();
    let c_star = RadialNodes::gn(&ground, 40.0, &QuadSpec::default()).unwrap().weinstein(3.0);
    let delta0 = 0.05;
    let half = gn_halfspace_near_optimizer_from(&ground, c_star, delta0).unwrap();
    assert!(half.achieved_quotient.unwrap() >= c_star - delta0);
    for r in [0.0, 0.5, 3.0] {
        assert_eq!(half.half(r, 0.0).v, 0.0);
    }
    assert!(gn_halfspace_near_optimizer_from(&ground, c_star, 1e-12).is_err());
}

#[test]
fn cutoff_profile() {
    let c = cutoff(4.0).unwrap();
    assert_eq!(c.value(0.0), 1.0);
    assert_eq!(c.value(4.0), 1.0);
    assert_eq!(c.value(8.0), 0.0);
    assert_eq!(c.support_radius(), 8.0);
    let mid = c.value(6.0);
    assert!(mid > 0.0 && mid < 1.0);
    assert!(c.derivative(6.0) < 0.0);
    assert!(cutoff(0.5).is_err());
}

#[test]
fn profile_json_round_trip() {
    let u = escobar_halfspace_optimizer(5).unwrap();
    let back = RadialProfile::from_json(&u.to_json()).unwrap();
    assert_eq!(back, u);
    assert!(RadialProfile::from_json(r#"{"n": 5}"#).is_err());
}

#[test]
fn sphere_area_oracle_is_consistent() {
    assert_relative_eq!(sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-15);
    assert_relative_eq!(sphere_area(4), 2.0 * common::PI_SQ, max_relative = 1e-15);
}

proptest! {
    #[test]
    fn escobar_is_tangentially_radial(n in 4usize..8, r in 0.0f64..20.0, t in 0.0f64..20.0, phi in 0.0f64..std::f64::consts::TAU) {
        let u = escobar_halfspace_optimizer(n).unwrap();
        let mut y = vec![0.0; n];
        y[0] = r * phi.cos();
        y[1] = r * phi.sin();
        y[n - 1] = t;
        let mut z = vec![0.0; n];
        z[n - 2] = r;
        z[n - 1] = t;
        prop_assert!((u.value_at(&y) - u.value_at(&z)).abs() <= 1e-14 * u.value_at(&z));
    }

    #[test]
    fn scaling_is_linear(f in 0.1f64..10.0, r in 0.0f64..5.0) {
        let u = escobar_halfspace_optimizer(4).unwrap();
        prop_assert!((u.scaled(f).half(r, 0.3).v - f * u.half(r, 0.3).v).abs() <= 1e-14 * f * u.half(r, 0.3).v);
    }
}
