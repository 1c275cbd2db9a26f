//! Gauss–Legendre rules, panel layouts, and compensated node sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `m`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for i in 0..m.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over consecutive breakpoints, each interval split `sub` times.
    pub fn integrate_panels(&self, breaks: &[f64], sub: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        split_panels(breaks, sub).into_iter().map(|(a, b)| self.integrate(a, b, &mut f)).sum()
    }
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Splits each interval between consecutive breakpoints into `sub` equal panels.
pub fn split_panels(breaks: &[f64], sub: usize) -> Vec<(f64, f64)> {
    let sub = sub.max(1);
    let mut out = Vec::with_capacity(breaks.len().saturating_sub(1) * sub);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / sub as f64;
        for k in 0..sub {
            let lo = a + h * k as f64;
            let hi = if k + 1 == sub { b } else { lo + h };
            out.push((lo, hi));
        }
    }
    out
}

/// Dyadic breakpoints 0, base, 2·base, 4·base, … up to `end` (inclusive).
pub fn dyadic_breaks(base: f64, end: f64) -> Vec<f64> {
    let mut v = vec![0.0];
    let mut x = base;
    while x < end * (1.0 - 1e-12) {
        v.push(x);
        x *= 2.0;
    }
    v.push(end);
    v
}

/// Quadrature resolution shared by all 1D/2D integrators.
///
/// `order` is the Gauss–Legendre order per panel; `subdivisions` multiplies the
/// base panel layout. Convergence is judged by comparing against the layout with
/// twice the panel count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    pub order: usize,
    pub subdivisions: usize,
    pub tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { order: 20, subdivisions: 1, tol: 1e-8 }
    }
}

impl QuadSpec {
    pub fn high() -> Self {
        Self { order: 32, subdivisions: 2, tol: 1e-10 }
    }

    pub fn doubled(&self) -> Self {
        Self { subdivisions: self.subdivisions * 2, ..*self }
    }

    pub fn rule(&self) -> GaussLegendre {
        GaussLegendre::new(self.order)
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sums of K per-node quantities, evaluated in parallel chunks and
/// combined in chunk order, so the result does not depend on the thread count.
pub fn par_sum<T: Sync, const K: usize>(items: &[T], f: impl Fn(&T) -> [f64; K] + Sync) -> [f64; K] {
    let partials: Vec<[Neumaier; K]> = items
        .par_chunks(2048)
        .map(|chunk| {
            let mut acc = [Neumaier::default(); K];
            for x in chunk {
                for (a, v) in acc.iter_mut().zip(f(x)) {
                    a.add(v);
                }
            }
            acc
        })
        .collect();
    let mut total = [Neumaier::default(); K];
    for p in partials {
        for (t, a) in total.iter_mut().zip(p) {
            t.add(a.sum);
            t.add(a.comp);
        }
    }
    total.map(|t| t.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for m in [1, 2, 5, 16, 33, 64] {
            let g = GaussLegendre::new(m);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "m={m} sum={s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2m_minus_1() {
        let g = GaussLegendre::new(6);
        for k in 0..12 {
            let got = g.integrate(0.0, 1.0, |x| x.powi(k));
            let want = 1.0 / (k as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn composite_panels_integrate_exponential() {
        let g = GaussLegendre::new(10);
        let got = g.integrate_panels(&dyadic_breaks(0.5, 8.0), 2, |x| (-x).exp());
        assert!((got - (1.0 - (-8.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn dyadic_breaks_end_exactly() {
        let b = dyadic_breaks(1.0, 20.0);
        assert_eq!(b, vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 20.0]);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = vec![1.0, 1e-16, 1e-16, -1.0];
        let [s] = par_sum(&xs, |x| [*x]);
        assert_eq!(s, 2e-16);
    }
}
