//! Gauss hypergeometric function on the real line, the hypergeometric
//! fundamental systems of the radial mode equations and a Duhamel solver for
//! the degenerate elliptic mode problems.
//!
//! The mode equation for angular momentum `l` at spectral parameter `d/2` is
//!
//! ```text
//! (1 - rho^2) f'' + ((d-1)/rho - (d+2) rho) f' - (d/2 (d/2+1) + l(l+d-2)/rho^2) f = F
//! ```
//!
//! With `f = rho^l g(rho^2)` it becomes hypergeometric with parameters
//! `a = (d/2 + l)/2`, `b = a + 1/2`, `c = 2a`.

use statrs::function::gamma::{digamma, gamma};

use crate::dd::Dd;
use crate::error::{invalid, Error, Result};
use crate::quad::GaussLegendre;

const SERIES_TOL: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 200_000;

fn is_nonpos_int(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

fn near_int(x: f64) -> Option<i64> {
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        Some(r as i64)
    } else {
        None
    }
}

/// `1/Gamma(x)`, zero at the poles.
fn rgamma(x: f64) -> f64 {
    if is_nonpos_int(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

fn poch(a: f64, n: usize) -> f64 {
    (0..n).map(|i| a + i as f64).product()
}

/// Defining power series. Converges for `|z| < 1`; terminates for non-positive integer `a` or `b`.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if is_nonpos_int(c) && !(is_nonpos_int(a) && a > c) && !(is_nonpos_int(b) && b > c) {
        return invalid(format!("c = {c} is a non-positive integer"));
    }
    let terminating = is_nonpos_int(a) || is_nonpos_int(b);
    if !terminating && z.abs() >= 1.0 {
        return invalid(format!("series diverges at z = {z}"));
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut small = 0;
    for n in 0..SERIES_MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        if term.abs() <= SERIES_TOL * sum.abs() {
            small += 1;
            if small >= 2 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::NoConvergence(format!("2F1({a}, {b}; {c}; {z}) series")))
}

/// `2F1(a, b; c; z)` for real `z <= 1`.
///
/// Series for `|z| <= 1/2`, the `z -> 1 - z` connection on `(1/2, 1)`
/// (logarithmic variant when `c - a - b` is an integer) and the Pfaff
/// transformation for `z < 0`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if z.is_nan() || z > 1.0 {
        return invalid(format!("z = {z} outside the real branch z <= 1"));
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    if is_nonpos_int(a) || is_nonpos_int(b) {
        return hyp2f1_series(a, b, c, z);
    }
    if is_nonpos_int(c) {
        return invalid(format!("c = {c} is a non-positive integer"));
    }
    if z == 1.0 {
        let m = c - a - b;
        if m <= 0.0 {
            return invalid(format!("2F1 diverges at z = 1 (c - a - b = {m} <= 0)"));
        }
        return Ok(gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b));
    }
    if z < 0.0 {
        let w = z / (z - 1.0);
        return Ok((1.0 - z).powf(-a) * hyp2f1(a, c - b, c, w)?);
    }
    if z <= 0.5 {
        return hyp2f1_series(a, b, c, z);
    }
    hyp2f1_reflected(a, b, c, z)
}

/// The `z -> 1 - z` connection path, valid for `0 < z < 1`.
pub fn hyp2f1_reflected(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return invalid(format!("reflection path needs 0 < z < 1, got {z}"));
    }
    let m = c - a - b;
    let y = 1.0 - z;
    match near_int(m) {
        None => {
            let t1 = gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b);
            let t2 = gamma(c) * gamma(-m) * rgamma(a) * rgamma(b);
            let mut v = 0.0;
            if t1 != 0.0 {
                v += t1 * hyp2f1_series(a, b, 1.0 - m, y)?;
            }
            if t2 != 0.0 {
                v += t2 * y.powf(m) * hyp2f1_series(c - a, c - b, 1.0 + m, y)?;
            }
            Ok(v)
        }
        Some(0) => log_case_zero(a, b, y),
        Some(m) if m > 0 => log_case_positive(a, b, m as usize, y),
        Some(m) => log_case_negative(a, b, (-m) as usize, y),
    }
}

fn sum_until_small(mut term_at: impl FnMut(usize) -> f64, what: &str) -> Result<f64> {
    let mut sum = 0.0;
    let mut small = 0;
    for n in 0..SERIES_MAX_TERMS {
        let t = term_at(n);
        sum += t;
        if t.abs() <= SERIES_TOL * sum.abs().max(1e-300) {
            small += 1;
            if small >= 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::NoConvergence(what.to_string()))
}

/// `c = a + b`.
fn log_case_zero(a: f64, b: f64, y: f64) -> Result<f64> {
    let ly = y.ln();
    let mut coef = 1.0; // (a)_n (b)_n / (n!)^2 y^n
    let s = sum_until_small(
        |n| {
            let nf = n as f64;
            if n > 0 {
                coef *= (a + nf - 1.0) * (b + nf - 1.0) / (nf * nf) * y;
            }
            coef * (2.0 * digamma(nf + 1.0) - digamma(a + nf) - digamma(b + nf) - ly)
        },
        "logarithmic 2F1 series (c = a + b)",
    )?;
    Ok(gamma(a + b) * rgamma(a) * rgamma(b) * s)
}

/// `c = a + b + m`, `m >= 1`.
fn log_case_positive(a: f64, b: f64, m: usize, y: f64) -> Result<f64> {
    let mf = m as f64;
    let mut finite = 0.0;
    let mut t = 1.0;
    for n in 0..m {
        let nf = n as f64;
        if n > 0 {
            t *= (a + nf - 1.0) * (b + nf - 1.0) / (nf * (1.0 - mf + nf - 1.0)) * y;
        }
        finite += t;
    }
    let pre1 = gamma(mf) * gamma(a + b + mf) * rgamma(a + mf) * rgamma(b + mf);
    let ly = y.ln();
    let mut coef = 1.0 / factorial(m); // (a+m)_n (b+m)_n / (n! (n+m)!) y^n
    let s = sum_until_small(
        |n| {
            let nf = n as f64;
            if n > 0 {
                coef *= (a + mf + nf - 1.0) * (b + mf + nf - 1.0) / (nf * (nf + mf)) * y;
            }
            coef * (ly - digamma(nf + 1.0) - digamma(nf + mf + 1.0) + digamma(a + nf + mf) + digamma(b + nf + mf))
        },
        "logarithmic 2F1 series (c = a + b + m)",
    )?;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 }; // (z - 1)^m = (-y)^m
    let pre2 = sign * y.powi(m as i32) * gamma(a + b + mf) * rgamma(a) * rgamma(b);
    Ok(pre1 * finite - pre2 * s)
}

/// `c = a + b - m`, `m >= 1`.
fn log_case_negative(a: f64, b: f64, m: usize, y: f64) -> Result<f64> {
    let mf = m as f64;
    let mut finite = 0.0;
    let mut t = 1.0;
    for n in 0..m {
        let nf = n as f64;
        if n > 0 {
            t *= (a - mf + nf - 1.0) * (b - mf + nf - 1.0) / (nf * (1.0 - mf + nf - 1.0)) * y;
        }
        finite += t;
    }
    let pre1 = gamma(mf) * gamma(a + b - mf) * rgamma(a) * rgamma(b) * y.powi(-(m as i32));
    let ly = y.ln();
    let mut coef = 1.0 / factorial(m); // (a)_n (b)_n / (n! (n+m)!) y^n
    let s = sum_until_small(
        |n| {
            let nf = n as f64;
            if n > 0 {
                coef *= (a + nf - 1.0) * (b + nf - 1.0) / (nf * (nf + mf)) * y;
            }
            coef * (ly - digamma(nf + 1.0) - digamma(nf + mf + 1.0) + digamma(a + nf) + digamma(b + nf))
        },
        "logarithmic 2F1 series (c = a + b - m)",
    )?;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let pre2 = sign * gamma(a + b - mf) * rgamma(a - mf) * rgamma(b - mf);
    Ok(pre1 * finite - pre2 * s)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `n`-th derivative in `z`.
pub fn hyp2f1_deriv(n: usize, a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if n == 0 {
        return hyp2f1(a, b, c, z);
    }
    let nf = n as f64;
    let pre = poch(a, n) * poch(b, n) / poch(c, n);
    if pre == 0.0 {
        return Ok(0.0);
    }
    Ok(pre * hyp2f1(a + nf, b + nf, c + nf, z)?)
}

/// Hypergeometric parameter `a = (d/2 + l)/2` of mode `l` at spectral parameter `d/2`.
pub fn mode_parameter(d: usize, ell: usize) -> f64 {
    (d as f64 / 2.0 + ell as f64) / 2.0
}

/// Hypergeometric solutions attached to the singular point `z = 1` and the
/// analytic solution at `z = 0`, all for `b = a + 1/2`, `c = 2a`.
#[derive(Debug, Clone, Copy)]
pub struct HyperSystem {
    pub a: f64,
}

impl HyperSystem {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return invalid(format!("mode parameter a = {a} must be positive"));
        }
        Ok(Self { a })
    }

    /// Coefficient of the regular solution at 1 in the connection formula.
    pub fn connection_regular(&self) -> f64 {
        -(2.0f64).powf(2.0 * self.a - 1.0) * (2.0 * self.a - 1.0)
    }

    pub fn connection_singular(&self) -> f64 {
        (2.0f64).powf(2.0 * self.a - 1.0)
    }

    /// Analytic at 0: `2F1(a, a+1/2; 2a; z)`; continued past 1 through the connection formula.
    pub fn psi0(&self, z: f64) -> Result<f64> {
        let a = self.a;
        if z < 1.0 {
            hyp2f1(a, a + 0.5, 2.0 * a, z)
        } else if z > 1.0 {
            Ok(self.connection_regular() * self.psi1(z)? + self.connection_singular() * self.psi1_tilde(z)?)
        } else {
            Err(Error::Singular("psi_0 is singular at z = 1".into()))
        }
    }

    pub fn dpsi0(&self, z: f64) -> Result<f64> {
        let a = self.a;
        if z < 1.0 {
            hyp2f1_deriv(1, a, a + 0.5, 2.0 * a, z)
        } else if z > 1.0 {
            Ok(self.connection_regular() * self.dpsi1(z)? + self.connection_singular() * self.dpsi1_tilde(z)?)
        } else {
            Err(Error::Singular("psi_0 is singular at z = 1".into()))
        }
    }

    /// Analytic at 1: `2F1(a, a+1/2; 3/2; 1-z)`.
    pub fn psi1(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return invalid(format!("psi_1 needs z > 0, got {z}"));
        }
        let a = self.a;
        hyp2f1(a, a + 0.5, 1.5, 1.0 - z)
    }

    pub fn dpsi1(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return invalid(format!("psi_1 needs z > 0, got {z}"));
        }
        let a = self.a;
        Ok(-hyp2f1_deriv(1, a, a + 0.5, 1.5, 1.0 - z)?)
    }

    /// Analytic part `2F1(a, a-1/2; 1/2; 1-z)` of the singular solution at 1.
    pub fn psi1_tilde_regular(&self, z: f64) -> Result<f64> {
        let a = self.a;
        hyp2f1(a, a - 0.5, 0.5, 1.0 - z)
    }

    /// `|1-z|^{-1/2} 2F1(a, a-1/2; 1/2; 1-z)`.
    pub fn psi1_tilde(&self, z: f64) -> Result<f64> {
        if z == 1.0 {
            return Err(Error::Singular("singular companion evaluated at z = 1".into()));
        }
        Ok((1.0 - z).abs().powf(-0.5) * self.psi1_tilde_regular(z)?)
    }

    pub fn dpsi1_tilde(&self, z: f64) -> Result<f64> {
        if z == 1.0 {
            return Err(Error::Singular("singular companion evaluated at z = 1".into()));
        }
        let a = self.a;
        let u = 1.0 - z;
        let g = hyp2f1(a, a - 0.5, 0.5, u)?;
        let dg = hyp2f1_deriv(1, a, a - 0.5, 0.5, u)?;
        Ok(0.5 * u.signum() * u.abs().powf(-1.5) * g - u.abs().powf(-0.5) * dg)
    }
}

/// Values and derivatives of the radial fundamental system at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalValues {
    pub phi0: f64,
    pub dphi0: f64,
    pub phi1: f64,
    pub dphi1: f64,
    pub phi1_tilde: f64,
    pub dphi1_tilde: f64,
    /// Closed-form Wronskian `-rho^{-(d-1)} (1-rho^2)^{-1} |1-rho^2|^{-1/2}`.
    pub wronskian: f64,
}

impl FundamentalValues {
    /// `phi0 phi1' - phi0' phi1` from the returned values.
    pub fn wronskian_numeric(&self) -> f64 {
        self.phi0 * self.dphi1 - self.dphi0 * self.phi1
    }
}

pub fn wronskian_closed_form(d: usize, rho: f64) -> f64 {
    let q = 1.0 - rho * rho;
    -rho.powi(-(d as i32 - 1)) / q * q.abs().powf(-0.5)
}

/// Radial fundamental system of mode `l` in dimension `d`.
#[derive(Debug, Clone, Copy)]
pub struct RadialSystem {
    pub d: usize,
    pub ell: usize,
    hyper: HyperSystem,
    scale: f64,
}

impl RadialSystem {
    pub fn new(d: usize, ell: usize) -> Result<Self> {
        if d < 2 {
            return invalid("radial fundamental systems need d >= 2");
        }
        let a = mode_parameter(d, ell);
        Ok(Self { d, ell, hyper: HyperSystem::new(a)?, scale: 2f64.powf(-(2.0 * a - 1.0) / 2.0) })
    }

    pub fn a(&self) -> f64 {
        self.hyper.a
    }

    fn lift(&self, rho: f64, psi: f64, dpsi: f64, scale: f64) -> (f64, f64) {
        let l = self.ell as i32;
        let rl = rho.powi(l);
        let drl = if l == 0 { 0.0 } else { l as f64 * rho.powi(l - 1) };
        (scale * rl * psi, scale * (drl * psi + 2.0 * rho * rl * dpsi))
    }

    pub fn phi0(&self, rho: f64) -> Result<f64> {
        Ok(self.scale * rho.powi(self.ell as i32) * self.hyper.psi0(rho * rho)?)
    }

    pub fn phi1(&self, rho: f64) -> Result<f64> {
        Ok(self.scale * rho.powi(self.ell as i32) * self.hyper.psi1(rho * rho)?)
    }

    /// `|1-rho|^{1/2} phi1_tilde(rho)`, analytic through `rho = 1`.
    pub fn phi1_tilde_regular(&self, rho: f64) -> Result<f64> {
        let z = rho * rho;
        Ok(rho.powi(self.ell as i32) / self.scale * (1.0 + rho).powf(-0.5) * self.hyper.psi1_tilde_regular(z)?)
    }

    pub fn values(&self, rho: f64) -> Result<FundamentalValues> {
        if !(rho > 0.0) {
            return invalid(format!("rho = {rho} must be positive"));
        }
        if rho == 1.0 {
            return Err(Error::Singular("fundamental system requested at rho = 1".into()));
        }
        let z = rho * rho;
        let h = &self.hyper;
        let (phi0, dphi0) = self.lift(rho, h.psi0(z)?, h.dpsi0(z)?, self.scale);
        let (phi1, dphi1) = self.lift(rho, h.psi1(z)?, h.dpsi1(z)?, self.scale);
        let (phi1_tilde, dphi1_tilde) = self.lift(rho, h.psi1_tilde(z)?, h.dpsi1_tilde(z)?, 1.0 / self.scale);
        Ok(FundamentalValues {
            phi0,
            dphi0,
            phi1,
            dphi1,
            phi1_tilde,
            dphi1_tilde,
            wronskian: wronskian_closed_form(self.d, rho),
        })
    }
}

pub fn fundamental_system(d: usize, ell: usize, rho: f64) -> Result<FundamentalValues> {
    RadialSystem::new(d, ell)?.values(rho)
}

/// Series in double-double arithmetic, `0 <= x < 1`.
fn hyp2f1_series_dd(a: f64, b: f64, c: f64, x: Dd) -> Dd {
    let (a, b, c) = (Dd::new(a), Dd::new(b), Dd::new(c));
    let mut sum = Dd::ONE;
    let mut term = Dd::ONE;
    let mut n = Dd::ZERO;
    for _ in 0..SERIES_MAX_TERMS {
        term = term * (a + n) * (b + n) / ((c + n) * (n + Dd::ONE)) * x;
        sum = sum + term;
        if term.hi == 0.0 || term.abs().hi < 1e-34 * sum.abs().hi {
            break;
        }
        n = n + Dd::ONE;
    }
    sum
}

/// `2^e` for a half-integer exponent, in double-double.
fn pow2_half_int(e: f64) -> Dd {
    let twice = (2.0 * e).round() as i32;
    let whole = Dd::new(2f64.powi(twice.div_euclid(2)));
    if twice.rem_euclid(2) == 1 {
        whole * Dd::new(2.0).sqrt()
    } else {
        whole
    }
}

/// Largest `|psi_0 - (-2^{2a-1}(2a-1) psi_1 + 2^{2a-1} psi_1_tilde)|` over the grid.
///
/// Every function is summed from its own power series in double-double
/// arithmetic: the two right-hand terms individually reach `1e10` for large
/// `a` and small `z`.
pub fn connection_residual(d: usize, ell: usize, z_grid: &[f64]) -> Result<f64> {
    let a = mode_parameter(d, ell);
    if (4.0 * a).fract() != 0.0 {
        return invalid("mode parameter must be a multiple of 1/4");
    }
    let mut worst = 0.0f64;
    for &z in z_grid {
        if !(z > 0.0 && z < 1.0) {
            return invalid(format!("connection grid point z = {z} outside (0, 1)"));
        }
        let zd = Dd::new(z);
        let y = Dd::ONE - zd;
        let lhs = hyp2f1_series_dd(a, a + 0.5, 2.0 * a, zd);
        let psi1 = hyp2f1_series_dd(a, a + 0.5, 1.5, y);
        let psi1t = hyp2f1_series_dd(a, a - 0.5, 0.5, y) / y.sqrt();
        let p = pow2_half_int(2.0 * a - 1.0);
        let rhs = -(p * Dd::new(2.0 * a - 1.0) * psi1) + p * psi1t;
        worst = worst.max((lhs - rhs).to_f64().abs());
    }
    Ok(worst)
}

/// Where to evaluate Frobenius indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularPoint {
    /// `rho = 0` of a radial mode equation.
    Origin,
    /// `rho = 1`, the light cone.
    LightCone,
    /// `xi = +-1` in one space dimension.
    LineEndpoints,
}

pub fn frobenius_indices(d: usize, ell: usize, s_p: f64, lambda: f64, point: SingularPoint) -> (f64, f64) {
    match point {
        SingularPoint::Origin => (ell as f64, -((d + ell) as f64 - 2.0)),
        SingularPoint::LightCone => (0.0, d as f64 / 2.0 - s_p - lambda - 0.5),
        SingularPoint::LineEndpoints => (0.0, -lambda - s_p),
    }
}

/// Coefficients `(a2, a1, a0)` of the mode equation at spectral parameter `d/2`.
pub fn mode_ode_coefficients(d: usize, ell: usize, rho: f64) -> (f64, f64, f64) {
    let df = d as f64;
    let lam = df / 2.0;
    let l = ell as f64;
    let a2 = 1.0 - rho * rho;
    let a1 = if d == 1 { -3.0 * rho } else { (df - 1.0) / rho - (df + 2.0) * rho };
    let a0 = -lam * (lam + 1.0) - if d == 1 { 0.0 } else { l * (l + df - 2.0) / (rho * rho) };
    (a2, a1, a0)
}

/// Right-hand side of an elliptic request.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveData {
    /// `d = 1`: one polynomial profile on `[-R, R]`, coefficients in `xi`.
    Line(Vec<f64>),
    /// `d >= 2`: `(l, coefficients in rho)` per mode.
    Modes(Vec<(usize, Vec<f64>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolveRequest {
    pub d: usize,
    pub k: usize,
    pub r: f64,
    pub data: SolveData,
}

pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Closed-form solution in one dimension.
#[derive(Debug, Clone)]
pub struct LineSolution {
    profile: Vec<f64>,
    rule: GaussLegendre,
}

impl LineSolution {
    pub fn eval(&self, xi: f64) -> f64 {
        let f = &self.profile;
        let right = self.rule.integrate_sqrt_weight(|z| eval_poly(f, 1.0 + z * (xi - 1.0)));
        let left = self.rule.integrate_sqrt_weight(|z| eval_poly(f, -1.0 + z * (xi + 1.0)));
        -(1.0 - xi) * right - (1.0 + xi) * left
    }
}

const SPLIT: f64 = 0.5;
const INNER_EDGE: f64 = 0.05;

/// Duhamel solution of one radial mode.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub ell: usize,
    pub d: usize,
    pub r: f64,
    system: RadialSystem,
    data: Vec<f64>,
    rule: GaussLegendre,
    /// `int_{1/2}^1 z^{d-1} (1-z^2)^{1/2} phi1 F`.
    tail: f64,
    /// `int_0^1 z^{d-1} (1-z^2)^{1/2} phi0 F`.
    total: f64,
}

impl RadialSolution {
    fn new(d: usize, ell: usize, r: f64, data: Vec<f64>, order: usize) -> Result<Self> {
        let system = RadialSystem::new(d, ell)?;
        let rule = GaussLegendre::new(order);
        let mut s = Self { ell, d, r, system, data, rule, tail: 0.0, total: 0.0 };
        s.tail = s.tail_integral()?;
        let head = s.lower_integral(SPLIT)?;
        let k = system.hyper.connection_regular();
        let reg = s.regular_integral(SPLIT, 1.0)?;
        s.total = head + k * s.tail + reg;
        Ok(s)
    }

    fn weight(&self, z: f64) -> f64 {
        z.powi(self.d as i32 - 1) * eval_poly(&self.data, z)
    }

    fn tail_integral(&self) -> Result<f64> {
        // z = 1 - (1 - SPLIT) s
        let h = 1.0 - SPLIT;
        let mut err = None;
        let v = self.rule.integrate_sqrt_weight(|s| {
            let z = 1.0 - h * s;
            match self.system.phi1(z) {
                Ok(p) => self.weight(z) * (1.0 + z).sqrt() * p,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(h.powf(1.5) * v)
    }

    /// `int_0^rho z^{d-1} (1-z^2)^{1/2} phi0 F`, `rho <= SPLIT`.
    fn lower_integral(&self, rho: f64) -> Result<f64> {
        let mut err = None;
        let v = self.rule.integrate_composite(0.0, rho, 2, |z| match self.system.phi0(z) {
            Ok(p) => self.weight(z) * (1.0 - z * z).sqrt() * p,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        err.map_or(Ok(v), Err)
    }

    /// `int_rho^SPLIT z^{d-1} (1-z^2)^{1/2} phi1 F` on geometrically graded panels.
    fn middle_integral(&self, rho: f64) -> Result<f64> {
        let panels = 6;
        let ratio = (SPLIT / rho).powf(1.0 / panels as f64);
        let mut acc = 0.0;
        let mut lo = rho;
        let mut err = None;
        for _ in 0..panels {
            let hi = (lo * ratio).min(SPLIT);
            acc += self.rule.integrate(lo, hi, |z| match self.system.phi1(z) {
                Ok(p) => self.weight(z) * (1.0 - z * z).sqrt() * p,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            });
            lo = hi;
        }
        err.map_or(Ok(acc), Err)
    }

    /// `int_lo^hi z^{d-1} (1+z)^{1/2} |1-z|^{1/2} phi1_tilde F`, analytic integrand.
    fn regular_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        let panels = ((hi - lo).abs() / 0.25).ceil().max(1.0) as usize;
        let mut err = None;
        let v = self.rule.integrate_composite(lo, hi, panels, |z| match self.system.phi1_tilde_regular(z) {
            Ok(p) => self.weight(z) * (1.0 + z).sqrt() * p,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        err.map_or(Ok(v), Err)
    }

    /// `int_0^1 h(1 + s(rho - 1)) sqrt(s) ds`, `h = z^{d-1} (1+z)^{1/2} phi1 F`.
    fn sqrt_integral(&self, rho: f64) -> Result<f64> {
        let mut err = None;
        let v = self.rule.integrate_sqrt_weight(|s| {
            let w = 1.0 + s * (rho - 1.0);
            match self.system.phi1(w) {
                Ok(p) => self.weight(w) * (1.0 + w).sqrt() * p,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        });
        err.map_or(Ok(v), Err)
    }

    fn eval_direct(&self, rho: f64) -> Result<f64> {
        let upper = self.tail + self.middle_integral(rho)?;
        let lower = self.lower_integral(rho)?;
        Ok(-self.system.phi0(rho)? * upper - self.system.phi1(rho)? * lower)
    }

    fn eval_factorized(&self, rho: f64) -> Result<f64> {
        let phi1 = self.system.phi1(rho)?;
        let j1 = self.regular_integral(rho, 1.0)?;
        let j2 = self.sqrt_integral(rho)?;
        Ok(-self.total * phi1 + phi1 * j1 - (1.0 - rho) * self.system.phi1_tilde_regular(rho)? * j2)
    }

    pub fn eval(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0 && rho <= self.r * (1.0 + 1e-12)) {
            return invalid(format!("rho = {rho} outside [0, {}]", self.r));
        }
        if rho < INNER_EDGE {
            // rho^l (g0 + g1 rho^2) through the values at the edge.
            let (r1, r2) = (INNER_EDGE, 1.5 * INNER_EDGE);
            let l = self.ell as i32;
            let g1 = self.eval_direct(r1)? / r1.powi(l);
            let g2 = self.eval_direct(r2)? / r2.powi(l);
            let slope = (g2 - g1) / (r2 * r2 - r1 * r1);
            return Ok(rho.powi(l) * (g1 + slope * (rho * rho - r1 * r1)));
        }
        if rho < SPLIT {
            self.eval_direct(rho)
        } else {
            self.eval_factorized(rho)
        }
    }
}

#[derive(Debug, Clone)]
pub enum EllipticSolution {
    Line(LineSolution),
    Modes(Vec<RadialSolution>),
}

const QUAD_ORDER: usize = 40;
const QUAD_CHECK_ORDER: usize = 28;

/// Particular solution of the degenerate elliptic mode problems.
pub fn elliptic_solve(request: &ModeSolveRequest) -> Result<EllipticSolution> {
    if !(request.r >= 1.0) {
        return invalid(format!("R = {} must be >= 1", request.r));
    }
    match (&request.data, request.d) {
        (SolveData::Line(profile), 1) => Ok(EllipticSolution::Line(LineSolution {
            profile: profile.clone(),
            rule: GaussLegendre::new(profile.len() / 2 + 24),
        })),
        (SolveData::Modes(modes), d) if d >= 2 => {
            let mut out = Vec::with_capacity(modes.len());
            for (ell, data) in modes {
                let sol = RadialSolution::new(d, *ell, request.r, data.clone(), QUAD_ORDER)?;
                let check = RadialSolution::new(d, *ell, request.r, data.clone(), QUAD_CHECK_ORDER)?;
                for rho in [0.07, 0.3, 0.7, 0.98, request.r.min(1.0 + 0.5 * (request.r - 1.0)).max(0.9)] {
                    let (u, v) = (sol.eval(rho)?, check.eval(rho)?);
                    if (u - v).abs() > 1e-10 * u.abs().max(1.0) {
                        return Err(Error::NoConvergence(format!(
                            "Duhamel quadrature for mode l = {ell} at rho = {rho}: {u} vs {v}"
                        )));
                    }
                }
                out.push(sol);
            }
            Ok(EllipticSolution::Modes(out))
        }
        (SolveData::Line(_), d) => invalid(format!("line profile given for d = {d}")),
        (SolveData::Modes(_), _) => invalid("mode data given for d = 1"),
    }
}
