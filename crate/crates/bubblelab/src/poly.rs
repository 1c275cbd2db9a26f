//! Sparse multivariate polynomials with sphere averaging.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use crate::special::sphere_monomial_average;

/// Polynomial in `nvars` variables, keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        debug_assert_eq!(exps.len(), self.nvars);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    /// Adds c·y_i·y_j (i may equal j).
    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        let mut e = vec![0; self.nvars];
        e[i] += 1;
        e[j] += 1;
        self.add_term(e, c);
    }

    pub fn add_linear(&mut self, i: usize, c: f64) {
        let mut e = vec![0; self.nvars];
        e[i] += 1;
        self.add_term(e, c);
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    /// Drops every monomial of total degree above `max_deg`.
    pub fn truncated(&self, max_deg: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() <= max_deg)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.iter().zip(y).map(|(&k, &x)| x.powi(k as i32)).product::<f64>()).sum()
    }

    /// Partial derivative in variable `i`.
    pub fn partial(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                out.add_term(d, c * e[i] as f64);
            }
        }
        out
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Averages the first `nvars - 1` variables over spheres y' = r ω, leaving a
    /// polynomial in (r, last variable).
    pub fn tangential_average(&self) -> Bivariate {
        let m = self.nvars - 1;
        let mut out = Bivariate::default();
        for (e, c) in &self.terms {
            let avg = sphere_monomial_average(&e[..m]);
            if avg != 0.0 {
                let i: u32 = e[..m].iter().sum();
                out.add(i, e[m], c * avg);
            }
        }
        out
    }

    /// Averages all variables over spheres y = ρ ω, leaving a polynomial in ρ
    /// (stored with zero second exponent).
    pub fn full_average(&self) -> Bivariate {
        let mut out = Bivariate::default();
        for (e, c) in &self.terms {
            let avg = sphere_monomial_average(e);
            if avg != 0.0 {
                out.add(e.iter().sum(), 0, c * avg);
            }
        }
        out
    }
}

/// Polynomial Σ c_ij r^i t^j.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bivariate {
    pub terms: BTreeMap<(u32, u32), f64>,
}

impl Bivariate {
    pub fn add(&mut self, i: u32, j: u32, c: f64) {
        if c != 0.0 {
            *self.terms.entry((i, j)).or_insert(0.0) += c;
        }
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        self.terms.iter().map(|(&(i, j), c)| c * r.powi(i as i32) * t.powi(j as i32)).sum()
    }

    /// Value minus one, with the constant term offset before summation.
    pub fn eval_minus_one(&self, r: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| if (i, j) == (0, 0) { c - 1.0 } else { c * r.powi(i as i32) * t.powi(j as i32) })
            .sum()
    }

    /// Homogeneous pieces evaluated at (r, t): entry k is Σ_{i+j=k} c_ij r^i t^j.
    pub fn by_degree(&self, r: f64, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.degree() as usize + 1];
        for (&(i, j), c) in &self.terms {
            out[(i + j) as usize] += c * r.powi(i as i32) * t.powi(j as i32);
        }
        out
    }

    /// Divides by r², which must divide every term.
    pub fn divide_r2(&self) -> Bivariate {
        let mut out = Bivariate::default();
        for (&(i, j), &c) in &self.terms {
            assert!(i >= 2, "r^2 does not divide r^{i} t^{j}");
            out.add(i - 2, j, c);
        }
        out
    }
}
