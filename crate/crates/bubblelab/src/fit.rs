//! Least-squares fits of power laws and truncated power series.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Coefficients of Σ c_k x^{p_k} fitted by least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub powers: Vec<i32>,
    pub coeffs: Vec<f64>,
    /// Root-mean-square residual relative to the root-mean-square data.
    pub relative_residual: f64,
}

impl PowerFit {
    pub fn coeff(&self, power: i32) -> Option<f64> {
        self.powers.iter().position(|&p| p == power).map(|i| self.coeffs[i])
    }
}

/// Fits y ≈ Σ c_k x^{p_k}. Columns are scaled to unit norm before the solve.
pub fn fit_powers(xs: &[f64], ys: &[f64], powers: &[i32]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(invalid("fit abscissae and ordinates differ in length"));
    }
    if xs.len() < powers.len() {
        return Err(invalid(format!("{} points cannot determine {} coefficients", xs.len(), powers.len())));
    }
    let m = xs.len();
    let k = powers.len();
    let mut a = DMatrix::from_fn(m, k, |i, j| xs[i].powi(powers[j]));
    let scales: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    for (j, s) in scales.iter().enumerate() {
        if *s == 0.0 {
            return Err(invalid("degenerate fit column"));
        }
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let b = DVector::from_column_slice(ys);
    let svd = a.clone().svd(true, true);
    let sol = svd.solve(&b, 1e-14).map_err(|e| Error::NonConvergence(format!("least squares: {e}")))?;
    let resid = &a * &sol - &b;
    let norm_b = b.norm();
    let coeffs = (0..k).map(|j| sol[j] / scales[j]).collect();
    Ok(PowerFit {
        powers: powers.to_vec(),
        coeffs,
        relative_residual: if norm_b > 0.0 { resid.norm() / norm_b } else { resid.norm() },
    })
}

/// Least-squares slope of log|y| against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(invalid("a log-log slope needs at least two matching points"));
    }
    if xs.iter().chain(ys).any(|v| *v == 0.0 || !v.is_finite()) || xs.iter().any(|&x| x < 0.0) {
        return Err(invalid("log-log slope needs positive abscissae and nonzero finite ordinates"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Dyadic grid ε₀, ε₀/2, …, ε₀/2^{levels-1}.
pub fn dyadic_grid(eps0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| eps0 / 2f64.powi(k as i32)).collect()
}

/// Truncated power-series arithmetic on coefficient vectors.
pub mod series {
    pub fn mul(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        for (i, x) in a.iter().enumerate().take(order + 1) {
            for (j, y) in b.iter().enumerate().take(order + 1 - i) {
                out[i + j] += x * y;
            }
        }
        out
    }

    /// ln(a) for a series with a[0] = 1.
    pub fn ln(a: &[f64], order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        let get = |k: usize| a.get(k).copied().unwrap_or(0.0);
        // (ln a)' = a'/a, solved term by term
        for k in 1..=order {
            let mut s = k as f64 * get(k);
            for j in 1..k {
                s -= j as f64 * out[j] * get(k - j);
            }
            out[k] = s / k as f64;
        }
        out
    }

    /// exp(a) for a series with a[0] = 0.
    pub fn exp(a: &[f64], order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        out[0] = 1.0;
        let get = |k: usize| a.get(k).copied().unwrap_or(0.0);
        for k in 1..=order {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * get(j) * out[k - j];
            }
            out[k] = s / k as f64;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_polynomial() {
        let xs = dyadic_grid(1e-2, 6);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 3.0 * x * x + 0.5 * x.powi(3)).collect();
        let f = fit_powers(&xs, &ys, &[1, 2, 3]).unwrap();
        assert!((f.coeffs[0] - 2.0).abs() < 1e-10);
        assert!((f.coeffs[1] + 3.0).abs() < 1e-7);
        assert!(f.relative_residual < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1e-3, 2e-3, 4e-3];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 7.0 * x.powf(2.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn series_log_exp_round_trip() {
        let a = [1.0, 0.3, -0.2, 0.05];
        let l = series::ln(&a, 3);
        let e = series::exp(&l, 3);
        for k in 0..4 {
            assert!((e[k] - a[k]).abs() < 1e-14);
        }
        // ln(1 + x) = x - x²/2 + x³/3
        let l = series::ln(&[1.0, 1.0], 3);
        assert!((l[2] + 0.5).abs() < 1e-15 && (l[3] - 1.0 / 3.0).abs() < 1e-15);
    }
}
