//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

/// J₀(x) from its power series Σ (-1)^k (x/2)^{2k} / (k!)².
pub fn bessel_j0(x: f64) -> f64 {
    let h = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        term *= -h / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// First positive zero of J₀ by bisection on [2, 3].
pub fn bessel_j0_first_zero() -> f64 {
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if bessel_j0(a) * bessel_j0(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Separation-aware discrete optima of (θ₁, θ₂) ↦ f(θ₁) + f(θ₂) on a uniform circle grid.
///
/// Returns unordered pairs (θ₁ ≤ θ₂, value) that are strict local minima or maxima among
/// their eight grid neighbours, discarding pairs closer than `min_separation`.
pub struct GridOptima {
    pub minima: Vec<(f64, f64, f64)>,
    pub maxima: Vec<(f64, f64, f64)>,
    pub step: f64,
}

pub fn brute_force_pair_optima(f: impl Fn(f64) -> f64, step: f64, min_separation: f64) -> GridOptima {
    // a multiple of four keeps the quarter turns on the grid
    let m = 4 * (TAU / (4.0 * step)).round() as usize;
    let h = TAU / m as f64;
    let vals: Vec<f64> = (0..m).map(|i| f(i as f64 * h)).collect();
    let circ = |a: usize, b: usize| {
        let d = (a as f64 - b as f64).abs() * h;
        d.min(TAU - d)
    };
    let mut minima = Vec::new();
    let mut maxima = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if circ(i, j) < min_separation {
                continue;
            }
            let v = vals[i] + vals[j];
            let mut is_min = true;
            let mut is_max = true;
            for di in [m - 1, 0, 1] {
                for dj in [m - 1, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let w = vals[(i + di) % m] + vals[(j + dj) % m];
                    is_min &= w > v;
                    is_max &= w < v;
                }
            }
            if is_min {
                minima.push((i as f64 * h, j as f64 * h, v));
            }
            if is_max {
                maxima.push((i as f64 * h, j as f64 * h, v));
            }
        }
    }
    GridOptima { minima, maxima, step: h }
}

/// Circle distance between angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Whether two unordered angle pairs coincide within `tol`.
pub fn same_pair(p: (f64, f64), q: (f64, f64), tol: f64) -> bool {
    let direct = angle_distance(p.0, q.0) <= tol && angle_distance(p.1, q.1) <= tol;
    let swapped = angle_distance(p.0, q.1) <= tol && angle_distance(p.1, q.0) <= tol;
    direct || swapped
}

/// Area of the unit sphere S^{m-1} ⊂ ℝ^m from Γ by the Lanczos-free recursion.
pub fn sphere_area(m: usize) -> f64 {
    match m {
        1 => 2.0,
        2 => TAU,
        _ => TAU / (m as f64 - 2.0) * sphere_area(m - 2),
    }
}

pub const PI_SQ: f64 = PI * PI;

/// Γ(x) for positive integers and half-integers.
pub fn gamma_half(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!((2.0 * x - twice).abs() < 1e-12 && twice >= 1.0, "gamma_half needs x in ½ℕ, got {x}");
    let (mut g, mut y) = if twice as i64 % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while y < x - 0.25 {
        g *= y;
        y += 1.0;
    }
    g
}

/// B(a, b) for a, b ∈ ½ℕ.
pub fn beta_half(a: f64, b: f64) -> f64 {
    gamma_half(a) * gamma_half(b) / gamma_half(a + b)
}

/// ∫_{ℝ^m} |z|^{2k} (1 + |z|²)^{-s} dz.
pub fn radial_power_integral(m: usize, k: usize, s: f64) -> f64 {
    let a = (m + 2 * k) as f64 / 2.0;
    sphere_area(m) * 0.5 * beta_half(a, s - a)
}
