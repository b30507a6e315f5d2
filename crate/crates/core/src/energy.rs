//! Free wave-flow operator on polynomial pairs, the `D_mu` operators, the
//! recursive higher energy inner products and their dissipativity
//! certificates.
//!
//! All integrals are exact monomial moments. The recursive forms are
//! evaluated through sums over words in the commuting `D_mu`: every `E^k`
//! is a fixed linear combination of
//!
//! ```text
//! G_L = sum_{|w| = L} int_B grad (w f)_1 . grad (w g)_1
//! M_L = sum_{|w| = L} int_B (w f)_2 (w g)_2
//! S_L = sum_{|w| = L} int_S (w f)_1 (w g)_1
//! ```
//!
//! so one pass over multisets of letters serves every `k`, `eps1` and `p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{FieldPair, ModelParams};
use crate::poly::{Moments, PolyField};

pub type PolyPair = FieldPair<PolyField>;

/// Boundary weights `eps_j` for `1 <= j < d/2 + 1`.
pub fn epsilon_schedule(d: usize, r: f64, eps1: f64) -> Result<Vec<f64>> {
    if !(eps1 > 0.0 && eps1 < 0.5) {
        return invalid(format!("eps1 = {eps1} must lie in (0, 1/2)"));
    }
    if !(r >= 1.0) {
        return invalid(format!("R = {r} must be >= 1"));
    }
    let half = d as f64 / 2.0;
    let count = first_branch_top(d);
    let mut out = Vec::with_capacity(count);
    for j in 1..=count {
        let mut e = (eps1 / (16.0 * r * r)).powi(j as i32 - 1) * eps1;
        for i in 1..j {
            e *= half - i as f64 - eps1;
        }
        out.push(e);
    }
    Ok(out)
}

/// Largest `j` with `j < d/2 + 1`.
fn first_branch_top(d: usize) -> usize {
    d.div_ceil(2)
}

#[derive(Debug, Clone)]
pub struct EnergyConfig {
    pub params: ModelParams,
    pub eps1: f64,
    pub schedule: Vec<f64>,
}

impl EnergyConfig {
    pub fn new(params: ModelParams, eps1: f64) -> Result<Self> {
        let schedule = epsilon_schedule(params.d, params.r, eps1)?;
        Ok(Self { params, eps1, schedule })
    }
}

fn check_pair(f: &PolyPair) -> Result<usize> {
    if f.f1.dim() != f.f2.dim() {
        return Err(Error::DimensionMismatch(f.f1.dim(), f.f2.dim()));
    }
    Ok(f.f1.dim())
}

/// Free part of the linearized flow without the `-s_p` shift.
fn apply_l_unshifted(f: &PolyPair) -> PolyPair {
    let f1 = f.f2.sub(&f.f1.euler()).expect("same dimension");
    let f2 = f.f1.laplacian().sub(&f.f2).and_then(|x| x.sub(&f.f2.euler())).expect("same dimension");
    FieldPair { f1, f2 }
}

/// `(-s f1 - xi.grad f1 + f2, lap f1 - (s+1) f2 - xi.grad f2)`.
pub fn apply_l_free(params: &ModelParams, f: &PolyPair) -> Result<PolyPair> {
    let d = check_pair(f)?;
    if d != params.d {
        return Err(Error::DimensionMismatch(d, params.d));
    }
    let u = apply_l_unshifted(f);
    let s = params.s_p;
    Ok(FieldPair { f1: u.f1.sub(&f.f1.scale(s))?, f2: u.f2.sub(&f.f2.scale(s))? })
}

/// `D_0 f = (f2, lap f1)`, `D_i f = (d_i f1, d_i f2)` for `mu = i` in `1..=d`.
pub fn apply_d(mu: usize, f: &PolyPair) -> Result<PolyPair> {
    let d = check_pair(f)?;
    if mu > d {
        return invalid(format!("mu = {mu} out of range 0..={d}"));
    }
    Ok(d_unchecked(mu, f))
}

fn d_unchecked(mu: usize, f: &PolyPair) -> PolyPair {
    if mu == 0 {
        FieldPair { f1: f.f2.clone(), f2: f.f1.laplacian() }
    } else {
        FieldPair { f1: f.f1.partial(mu - 1), f2: f.f2.partial(mu - 1) }
    }
}

fn pair_is_zero(f: &PolyPair) -> bool {
    f.f1.is_zero() && f.f2.is_zero()
}

/// Word sums `G_L`, `M_L`, `S_L` of a pair, `L = 0..=max_len`.
#[derive(Debug, Clone)]
pub struct WordSums {
    pub grad: Vec<f64>,
    pub l2: Vec<f64>,
    pub surf: Vec<f64>,
}

impl WordSums {
    pub fn compute(moments: &Moments, f: &PolyPair, g: &PolyPair, max_len: usize) -> Self {
        let mut out = Self { grad: vec![0.0; max_len + 1], l2: vec![0.0; max_len + 1], surf: vec![0.0; max_len + 1] };
        let d = f.f1.dim();
        let mut counts = vec![0usize; d + 1];
        out.visit(moments, f, g, 0, 0, &mut counts, max_len);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn visit(
        &mut self,
        m: &Moments,
        f: &PolyPair,
        g: &PolyPair,
        min_letter: usize,
        depth: usize,
        counts: &mut Vec<usize>,
        max_len: usize,
    ) {
        let w = multinomial(depth, counts);
        self.grad[depth] += w * m.gradient_inner(&f.f1, &g.f1);
        self.l2[depth] += w * m.ball_inner(&f.f2, &g.f2);
        self.surf[depth] += w * m.sphere_inner(&f.f1, &g.f1);
        if depth == max_len {
            return;
        }
        for letter in min_letter..counts.len() {
            let cf = d_unchecked(letter, f);
            if pair_is_zero(&cf) {
                continue;
            }
            let cg = d_unchecked(letter, g);
            if pair_is_zero(&cg) {
                continue;
            }
            counts[letter] += 1;
            self.visit(m, &cf, &cg, letter, depth + 1, counts, max_len);
            counts[letter] -= 1;
        }
    }

    fn e1(&self, len: usize, eps1: f64, r: f64) -> f64 {
        self.grad[len] + self.l2[len] + 2.0 * eps1 / r * self.surf[len]
    }

    /// `E^k` from the word sums, `k` at most `max_len + 1`.
    pub fn energy(&self, d: usize, r: f64, schedule: &[f64], eps1: f64, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.grad.len());
        let top = first_branch_top(d);
        let base = |j: usize, len: usize| -> f64 {
            // E^j over words of length `len`, j <= top.
            let mut acc = self.e1(len + j - 1, eps1, r);
            for i in 2..=j {
                acc += 2.0 * schedule[i - 1] / r * self.surf[len + j - i];
            }
            acc
        };
        if k <= top {
            return base(k, 0);
        }
        let m = k - top;
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..=m {
            acc += binom * base(top, m - i);
            binom = binom * (m - i) as f64 / (i + 1) as f64;
        }
        acc
    }
}

fn multinomial(n: usize, counts: &[usize]) -> f64 {
    let mut v = factorial(n);
    for &c in counts {
        v /= factorial(c);
    }
    v
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `E^k(f, g)`.
pub fn inner_ek(config: &EnergyConfig, k: usize, f: &PolyPair, g: &PolyPair) -> Result<f64> {
    if k < 1 {
        return invalid("energy order k must be >= 1");
    }
    let d = check_pair(f)?;
    let dg = check_pair(g)?;
    if d != dg || d != config.params.d {
        return Err(Error::DimensionMismatch(d, dg));
    }
    let deg = f.f1.degree().max(f.f2.degree()).max(g.f1.degree()).max(g.f2.degree());
    let moments = Moments::new(d, config.params.r, 2 * deg + 2);
    let sums = WordSums::compute(&moments, f, g, k - 1);
    Ok(sums.energy(d, config.params.r, &config.schedule, config.eps1, k))
}

/// Everything needed to evaluate dissipativity margins of one pair over a
/// range of `k`, `eps1` and `p`.
#[derive(Debug, Clone)]
pub struct MarginProbe {
    d: usize,
    r: f64,
    norm: WordSums,
    flow: WordSums,
}

impl MarginProbe {
    pub fn new(f: &PolyPair, r: f64, k_max: usize) -> Result<Self> {
        let d = check_pair(f)?;
        let deg = f.f1.degree().max(f.f2.degree());
        let moments = Moments::new(d, r, 2 * deg + 2);
        let lf = apply_l_unshifted(f);
        Ok(Self {
            d,
            r,
            norm: WordSums::compute(&moments, f, f, k_max - 1),
            flow: WordSums::compute(&moments, &lf, f, k_max - 1),
        })
    }

    /// `(E^k(L f, f) - bound, ||f||^2_{E^k})`.
    pub fn margin(&self, config: &EnergyConfig, k: usize) -> Result<(f64, f64)> {
        if config.params.d != self.d || config.params.r != self.r {
            return invalid("probe and energy configuration disagree on (d, R)");
        }
        if k < 1 || k > self.norm.grad.len() {
            return invalid(format!("k = {k} outside the probed range"));
        }
        let s = config.params.s_p;
        let eps1 = config.eps1;
        let sched = &config.schedule;
        let norm = self.norm.energy(self.d, self.r, sched, eps1, k);
        let flow = self.flow.energy(self.d, self.r, sched, eps1, k) - s * norm;
        let half = self.d as f64 / 2.0;
        let bound = if k <= first_branch_top(self.d) {
            let eps_k = *sched
                .get(k - 1)
                .ok_or_else(|| Error::InvalidParameter(format!("schedule has no entry for k = {k}")))?;
            (half - s - k as f64) * norm + (-half + k as f64 + eps1) * (2.0 * eps_k / self.r) * self.norm.surf[0]
        } else {
            (-s + eps1) * norm
        };
        Ok((flow - bound, norm))
    }
}

/// `E^k(L f, f)` minus the dissipative bound; non-positive when the estimate holds.
pub fn dissipativity_margin(config: &EnergyConfig, k: usize, f: &PolyPair) -> Result<f64> {
    if k < 1 {
        return invalid("energy order k must be >= 1");
    }
    let probe = MarginProbe::new(f, config.params.r, k)?;
    Ok(probe.margin(config, k)?.0)
}

/// Surface integral and the two explicit trace majorants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceReport {
    pub surface: f64,
    pub ball: f64,
    pub gradient: f64,
    /// `((d+1)/R) int_B f^2 + R int_B |grad f|^2`, dominates `surface`.
    pub surface_bound: f64,
    /// `(2R/d) int_S f^2 + (2R/d)^2 int_B |grad f|^2`, dominates `ball`.
    pub ball_bound: f64,
}

impl TraceReport {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.surface <= self.surface_bound * (1.0 + rel_tol) && self.ball <= self.ball_bound * (1.0 + rel_tol)
    }
}

pub fn trace_check(d: usize, r: f64, f: &PolyField) -> TraceReport {
    let m = Moments::new(d, r, 2 * f.degree() + 2);
    let surface = m.sphere_inner(f, f);
    let ball = m.ball_inner(f, f);
    let gradient = m.gradient_inner(f, f);
    let df = d as f64;
    TraceReport {
        surface,
        ball,
        gradient,
        surface_bound: (df + 1.0) / r * ball + r * gradient,
        ball_bound: 2.0 * r / df * surface + (2.0 * r / df).powi(2) * gradient,
    }
}

/// Sobolev comparison norm: all `|alpha| <= k` derivatives of `f1`, `|alpha| <= k-1` of `f2`.
pub fn sobolev_norm_sq(f: &PolyPair, k: usize, r: f64) -> Result<f64> {
    let d = check_pair(f)?;
    let deg = f.f1.degree().max(f.f2.degree());
    let m = Moments::new(d, r, 2 * deg + 2);
    let mut total = 0.0;
    // Level sets of multi-indices, built by raising indices in nondecreasing order.
    let mut level: Vec<(PolyField, PolyField, usize)> = vec![(f.f1.clone(), f.f2.clone(), 0)];
    for order in 0..=k {
        for (p1, p2, _) in &level {
            total += m.ball_inner(p1, p1);
            if order < k {
                total += m.ball_inner(p2, p2);
            }
        }
        if order == k {
            break;
        }
        let mut next = Vec::new();
        for (p1, p2, last) in &level {
            for i in *last..d {
                let q1 = p1.partial(i);
                let q2 = p2.partial(i);
                if !(q1.is_zero() && q2.is_zero()) {
                    next.push((q1, q2, i));
                }
            }
        }
        level = next;
    }
    Ok(total)
}

/// Seeded random polynomial with `n_terms` monomials of total degree at most `degree`.
pub fn random_poly(rng: &mut impl Rng, d: usize, degree: usize, n_terms: usize) -> PolyField {
    let mut terms = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        let target = rng.random_range(0..=degree);
        let mut e = vec![0u8; d];
        for _ in 0..target {
            e[rng.random_range(0..d)] += 1;
        }
        terms.push((e, rng.random_range(-1.0..1.0)));
    }
    PolyField::from_terms(d, terms).expect("degree within default cap")
}

/// Seeded suite of random polynomial pairs.
pub fn random_pairs(seed: u64, d: usize, degree: usize, n_terms: usize, count: usize) -> Vec<PolyPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| FieldPair {
            f1: random_poly(&mut rng, d, degree, n_terms),
            f2: random_poly(&mut rng, d, degree, n_terms),
        })
        .collect()
}

/// `D_mu L f - L D_mu f + D_mu f`, which vanishes identically.
pub fn commutator_defect(params: &ModelParams, mu: usize, f: &PolyPair) -> Result<PolyPair> {
    let lhs = apply_d(mu, &apply_l_free(params, f)?)?;
    let df = apply_d(mu, f)?;
    let rhs = apply_l_free(params, &df)?;
    Ok(FieldPair { f1: lhs.f1.sub(&rhs.f1)?.add(&df.f1)?, f2: lhs.f2.sub(&rhs.f2)?.add(&df.f2)? })
}
