//! Multivariate polynomials with exact differentiation and exact moments
//! over balls and spheres.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEGREE: usize = 12;

/// Real polynomial in `d` variables keyed by exponent multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    d: usize,
    max_degree: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

impl PolyField {
    pub fn zero(d: usize) -> Self {
        Self { d, max_degree: DEFAULT_MAX_DEGREE, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        Self::monomial(d, &vec![0; d], c)
    }

    pub fn coordinate(d: usize, i: usize) -> Self {
        let mut e = vec![0u8; d];
        e[i] = 1;
        Self::monomial(d, &e, 1.0)
    }

    pub fn monomial(d: usize, exps: &[u8], c: f64) -> Self {
        assert_eq!(exps.len(), d);
        let mut p = Self::zero(d);
        if c != 0.0 {
            p.terms.insert(exps.to_vec(), c);
        }
        p
    }

    pub fn from_terms(d: usize, terms: impl IntoIterator<Item = (Vec<u8>, f64)>) -> Result<Self> {
        let mut p = Self::zero(d);
        for (e, c) in terms {
            if e.len() != d {
                return Err(Error::DimensionMismatch(e.len(), d));
            }
            *p.terms.entry(e).or_insert(0.0) += c;
        }
        p.normalize();
        p.check_degree()?;
        Ok(p)
    }

    pub fn with_max_degree(mut self, max_degree: usize) -> Result<Self> {
        self.max_degree = max_degree;
        self.check_degree()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| total(e)).max().unwrap_or(0)
    }

    pub fn coeff(&self, exps: &[u8]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn normalize(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }

    fn check_degree(&self) -> Result<()> {
        let deg = self.degree();
        if deg > self.max_degree {
            return Err(Error::DegreeOverflow { degree: deg, max: self.max_degree });
        }
        Ok(())
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch(self.d, other.d));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        let mut out = self.clone();
        out.max_degree = self.max_degree.max(other.max_degree);
        for (e, c) in &other.terms {
            *out.terms.entry(e.clone()).or_insert(0.0) += c;
        }
        out.normalize();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= a;
        }
        out.normalize();
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        let max = self.max_degree.max(other.max_degree);
        let deg = self.degree() + other.degree();
        if !self.is_zero() && !other.is_zero() && deg > max {
            return Err(Error::DegreeOverflow { degree: deg, max });
        }
        let mut out = Self { d: self.d, max_degree: max, terms: BTreeMap::new() };
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u8> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *out.terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        out.normalize();
        Ok(out)
    }

    pub fn partial(&self, i: usize) -> Self {
        assert!(i < self.d, "partial index {i} out of range for d = {}", self.d);
        let mut out = Self { d: self.d, max_degree: self.max_degree, terms: BTreeMap::new() };
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                *out.terms.entry(f).or_insert(0.0) += c * e[i] as f64;
            }
        }
        out.normalize();
        out
    }

    pub fn laplacian(&self) -> Self {
        let mut out = Self { d: self.d, max_degree: self.max_degree, terms: BTreeMap::new() };
        for (e, c) in &self.terms {
            for i in 0..self.d {
                if e[i] >= 2 {
                    let mut f = e.clone();
                    f[i] -= 2;
                    *out.terms.entry(f).or_insert(0.0) += c * (e[i] as f64) * (e[i] as f64 - 1.0);
                }
            }
        }
        out.normalize();
        out
    }

    /// `xi . grad`, which multiplies each monomial by its degree.
    pub fn euler(&self) -> Self {
        let mut out = self.clone();
        for (e, c) in out.terms.iter_mut() {
            *c *= total(e) as f64;
        }
        out.normalize();
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.iter().zip(x).map(|(&k, xi)| xi.powi(k as i32)).product::<f64>()).sum()
    }

    pub fn integrate_ball(&self, r: f64) -> f64 {
        self.terms.iter().map(|(e, c)| c * ball_monomial_integral(e, self.d, r)).sum()
    }

    pub fn integrate_sphere(&self, r: f64) -> f64 {
        self.terms.iter().map(|(e, c)| c * sphere_monomial_integral(e, self.d, r)).sum()
    }
}

/// `Gamma(m/2)` for a positive integer `m`, by the upward recurrence.
pub fn gamma_half(m: usize) -> f64 {
    assert!(m >= 1);
    let (mut g, mut x) = if m.is_multiple_of(2) { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    let target = m as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

fn total(e: &[u8]) -> usize {
    e.iter().map(|&k| k as usize).sum()
}

/// `int_{S^{d-1}} omega^alpha` over the unit sphere (counting measure on {-1, 1} for d = 1).
fn unit_sphere_moment(alpha: &[u8]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let d = alpha.len() as f64;
    let n = total(alpha) as f64;
    let num: f64 = alpha.iter().map(|&a| gamma_half(a as usize + 1)).product();
    2.0 * num / gamma_half((n + d) as usize)
}

/// Exact `int_{B^d_R} xi^alpha d xi`.
pub fn ball_monomial_integral(alpha: &[u8], d: usize, r: f64) -> f64 {
    assert_eq!(alpha.len(), d);
    let n = total(alpha) as f64 + d as f64;
    unit_sphere_moment(alpha) * r.powf(n) / n
}

/// Exact `int_{S^{d-1}_R} xi^alpha d sigma`.
pub fn sphere_monomial_integral(alpha: &[u8], d: usize, r: f64) -> f64 {
    assert_eq!(alpha.len(), d);
    unit_sphere_moment(alpha) * r.powf(total(alpha) as f64 + d as f64 - 1.0)
}

/// Cached moments for fast evaluation of bilinear integrals `int f g`.
#[derive(Debug, Clone)]
pub struct Moments {
    d: usize,
    r: f64,
    half_gamma: Vec<f64>,
    ball: Vec<f64>,
    sphere: Vec<f64>,
}

impl Moments {
    pub fn new(d: usize, r: f64, max_total: usize) -> Self {
        let half_gamma = (0..=max_total).map(|a| gamma_half(a + 1)).collect();
        let mut ball = Vec::with_capacity(max_total + 1);
        let mut sphere = Vec::with_capacity(max_total + 1);
        for n in 0..=max_total {
            let m = n as f64 + d as f64;
            let g = 2.0 / gamma_half(n + d);
            sphere.push(g * r.powf(m - 1.0));
            ball.push(g * r.powf(m) / m);
        }
        Self { d, r, half_gamma, ball, sphere }
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    fn product_part(&self, a: &[u8], b: &[u8]) -> Option<(f64, usize)> {
        let mut prod = 1.0;
        let mut n = 0usize;
        for (x, y) in a.iter().zip(b) {
            let e = (*x + *y) as usize;
            if e % 2 == 1 {
                return None;
            }
            prod *= self.half_gamma[e];
            n += e;
        }
        Some((prod, n))
    }

    /// `int_B f g`.
    pub fn ball_inner(&self, f: &PolyField, g: &PolyField) -> f64 {
        debug_assert_eq!(f.d, self.d);
        let mut acc = 0.0;
        for (ea, ca) in &f.terms {
            for (eb, cb) in &g.terms {
                if let Some((prod, n)) = self.product_part(ea, eb) {
                    acc += ca * cb * prod * self.ball[n];
                }
            }
        }
        acc
    }

    /// `int_S f g`.
    pub fn sphere_inner(&self, f: &PolyField, g: &PolyField) -> f64 {
        let mut acc = 0.0;
        for (ea, ca) in &f.terms {
            for (eb, cb) in &g.terms {
                if let Some((prod, n)) = self.product_part(ea, eb) {
                    acc += ca * cb * prod * self.sphere[n];
                }
            }
        }
        acc
    }

    /// `int_B grad f . grad g`.
    pub fn gradient_inner(&self, f: &PolyField, g: &PolyField) -> f64 {
        (0..self.d).map(|i| self.ball_inner(&f.partial(i), &g.partial(i))).sum()
    }
}
