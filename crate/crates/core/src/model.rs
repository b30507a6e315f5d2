//! Model parameters, the boosted ODE blowup family, its symmetry modes and
//! the scalar power nonlinearity.

use crate::error::{invalid, Error, Result};
use crate::poly::PolyField;
use crate::quad::GaussLegendre;

/// Scaling exponent, blowup amplitude and the decay exponent `min{1, s}`.
pub fn scaling_constants(p: f64) -> Result<(f64, f64, f64)> {
    if !(p > 1.0) || !p.is_finite() {
        return invalid(format!("power p = {p} must be a finite number > 1"));
    }
    let s = 2.0 / (p - 1.0);
    let c = (s * (s + 1.0)).powf(1.0 / (p - 1.0));
    Ok((s, c, s.min(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub d: usize,
    pub p: f64,
    pub k: usize,
    pub r: f64,
    pub s_p: f64,
    pub c_p: f64,
    pub omega_p: f64,
}

impl ModelParams {
    pub fn new(d: usize, p: f64, k: usize, r: f64) -> Result<Self> {
        if d == 0 {
            return invalid("dimension d must be >= 1");
        }
        if k == 0 {
            return invalid("regularity k must be >= 1");
        }
        if !(r >= 1.0) || !r.is_finite() {
            return invalid(format!("cone radius R = {r} must be >= 1"));
        }
        let (s_p, c_p, omega_p) = scaling_constants(p)?;
        Ok(Self { d, p, k, r, s_p, c_p, omega_p })
    }

    /// `k > d/2`, the regularity needed for the nonlinear theory. Flagged, never enforced.
    pub fn regularity_ok(&self) -> bool {
        2 * self.k > self.d
    }

    /// Constant potential `(s+1)(s+2)` of the unboosted linearization.
    pub fn potential_constant(&self) -> f64 {
        (self.s_p + 1.0) * (self.s_p + 2.0)
    }

    /// Lower edge `max{-1, d/2 - s - k, -s}` of the admissible window for `omega0`.
    pub fn omega_window(&self) -> f64 {
        let dk = self.d as f64 / 2.0 - self.s_p - self.k as f64;
        (-1.0f64).max(dk).max(-self.s_p)
    }

    pub fn default_omega0(&self) -> f64 {
        -self.omega_p / 2.0
    }
}

pub fn lorentz_factor(beta: &[f64]) -> Result<f64> {
    let b2: f64 = beta.iter().map(|b| b * b).sum();
    if !(b2 < 1.0) {
        return invalid(format!("|beta| = {} must be < 1", b2.sqrt()));
    }
    Ok(1.0 / (1.0 - b2).sqrt())
}

/// Velocity `beta` and blowup time `T` of a member of the blowup family.
#[derive(Debug, Clone, PartialEq)]
pub struct Boost {
    pub beta: Vec<f64>,
    pub t_blow: f64,
}

impl Boost {
    pub fn new(beta: Vec<f64>, t_blow: f64) -> Result<Self> {
        lorentz_factor(&beta)?;
        if !(t_blow > 0.0) {
            return invalid(format!("blowup time T = {t_blow} must be positive"));
        }
        Ok(Self { beta, t_blow })
    }

    pub fn unboosted(d: usize) -> Self {
        Self { beta: vec![0.0; d], t_blow: 1.0 }
    }

    pub fn gamma(&self) -> f64 {
        lorentz_factor(&self.beta).expect("validated on construction")
    }

    pub fn speed(&self) -> f64 {
        self.beta.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

/// Checks `|beta| < 1/R0` where `R0` defaults to the cone radius `r`.
pub fn check_boost_on_ball(beta: &[f64], r: f64, r0: Option<f64>) -> Result<()> {
    let radius = r0.unwrap_or(r);
    let speed = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    if !(radius > 0.0) || !(speed * radius < 1.0) {
        return invalid(format!("boost |beta| = {speed} is not admissible on a ball of radius {radius}"));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(psi, d_t psi)` of the boosted blowup solution at `(t, x)`.
pub fn blowup_field(params: &ModelParams, boost: &Boost, t: f64, x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != boost.beta.len() {
        return Err(Error::DimensionMismatch(x.len(), boost.beta.len()));
    }
    let base = boost.t_blow - t + dot(&boost.beta, x);
    if !(base > 0.0) {
        return Err(Error::Singular(format!("T - t + beta.x = {base} at t = {t}: on or past the singular hyperplane")));
    }
    let s = params.s_p;
    let amp = params.c_p * boost.gamma().powf(-s);
    let psi = amp * base.powf(-s);
    Ok((psi, s * psi / base))
}

/// The symmetry eigenmodes: time translation (eigenvalue 1) and the boosts (eigenvalue 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryMode {
    Time,
    Boost(usize),
}

/// Profile `c gamma^{-s} (1 + beta.xi)^{-s}` of the boosted blowup in similarity variables.
pub fn boosted_profile(params: &ModelParams, beta: &[f64], xi: &[f64]) -> Result<(f64, f64)> {
    let g = lorentz_factor(beta)?;
    let w = 1.0 + dot(beta, xi);
    if !(w > 0.0) {
        return Err(Error::Singular(format!("1 + beta.xi = {w}")));
    }
    let s = params.s_p;
    let amp = params.c_p * g.powf(-s);
    Ok((amp * w.powf(-s), s * amp * w.powf(-s - 1.0)))
}

/// Potential `p |f*_beta|^{p-1} = (s+1)(s+2)(1 - |beta|^2)(1 + beta.xi)^{-2}`.
pub fn potential(params: &ModelParams, beta: &[f64], xi: &[f64]) -> Result<f64> {
    let w = 1.0 + dot(beta, xi);
    if !(w > 0.0) {
        return Err(Error::Singular(format!("1 + beta.xi = {w}")));
    }
    let b2 = dot(beta, beta);
    if !(b2 < 1.0) {
        return invalid(format!("|beta|^2 = {b2} must be < 1"));
    }
    Ok(params.potential_constant() * (1.0 - b2) / (w * w))
}

/// Pointwise value of a symmetry mode at `xi`.
pub fn symmetry_mode_at(params: &ModelParams, beta: &[f64], which: SymmetryMode, xi: &[f64]) -> Result<(f64, f64)> {
    let g = lorentz_factor(beta)?;
    let s = params.s_p;
    let c = params.c_p;
    let w = 1.0 + dot(beta, xi);
    if !(w > 0.0) {
        return Err(Error::Singular(format!("1 + beta.xi = {w}")));
    }
    let gs = g.powf(-s);
    match which {
        SymmetryMode::Time => Ok((s * c * gs * w.powf(-s - 1.0), s * (s + 1.0) * c * gs * w.powf(-s - 2.0))),
        SymmetryMode::Boost(i) => {
            if i >= xi.len() || i >= beta.len() {
                return invalid(format!("boost index {i} out of range for d = {}", xi.len()));
            }
            let f1 = s * c * gs * w.powf(-s - 1.0) * xi[i] + s * c * g.powf(-s + 2.0) * w.powf(-s) * beta[i];
            let f2 = s * (s + 1.0) * c * gs * w.powf(-s - 2.0) * xi[i]
                + s * s * c * g.powf(-s + 2.0) * w.powf(-s - 1.0) * beta[i];
            Ok((f1, f2))
        }
    }
}

/// Symmetry mode sampled on a list of points.
pub fn symmetry_mode(
    params: &ModelParams,
    beta: &[f64],
    which: SymmetryMode,
    points: &[Vec<f64>],
) -> Result<FieldPair<Vec<f64>>> {
    let mut f1 = Vec::with_capacity(points.len());
    let mut f2 = Vec::with_capacity(points.len());
    for xi in points {
        let (a, b) = symmetry_mode_at(params, beta, which, xi)?;
        f1.push(a);
        f2.push(b);
    }
    Ok(FieldPair { f1, f2 })
}

/// Unboosted symmetry modes are polynomials.
pub fn symmetry_mode_poly(params: &ModelParams, which: SymmetryMode) -> Result<FieldPair<PolyField>> {
    let d = params.d;
    let s = params.s_p;
    let c = params.c_p;
    match which {
        SymmetryMode::Time => {
            Ok(FieldPair { f1: PolyField::constant(d, s * c), f2: PolyField::constant(d, s * (s + 1.0) * c) })
        }
        SymmetryMode::Boost(i) if i < d => Ok(FieldPair {
            f1: PolyField::coordinate(d, i).scale(s * c),
            f2: PolyField::coordinate(d, i).scale(s * (s + 1.0) * c),
        }),
        SymmetryMode::Boost(i) => invalid(format!("boost index {i} out of range for d = {d}")),
    }
}

/// A pair of scalar fields sharing one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair<F> {
    pub f1: F,
    pub f2: F,
}

impl FieldPair<Vec<f64>> {
    pub fn zeros(n: usize) -> Self {
        Self { f1: vec![0.0; n], f2: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.f1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f1.is_empty()
    }

    /// Stacked `[f1; f2]`.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut v = self.f1.clone();
        v.extend_from_slice(&self.f2);
        v
    }

    pub fn from_stacked(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self { f1: v[..n].to_vec(), f2: v[n..].to_vec() }
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.f1.iter_mut().zip(&other.f1) {
            *x += a * y;
        }
        for (x, y) in self.f2.iter_mut().zip(&other.f2) {
            *x += a * y;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { f1: self.f1.iter().map(|x| a * x).collect(), f2: self.f2.iter().map(|x| a * x).collect() }
    }
}

/// `F(z) = z |z|^{p-1}`.
pub fn power_nonlinearity(p: f64, z: f64) -> f64 {
    let a = z.abs();
    if a < 1e-300 {
        return 0.0;
    }
    z.signum() * (p * a.ln()).exp()
}

/// `F'(z) = p |z|^{p-1}`.
pub fn power_nonlinearity_deriv(p: f64, z: f64) -> f64 {
    let a = z.abs();
    if a < 1e-300 {
        return if p > 1.0 { 0.0 } else { f64::INFINITY };
    }
    p * ((p - 1.0) * a.ln()).exp()
}

/// `F''(z) = p (p-1) |z|^{p-3} z`.
pub fn power_nonlinearity_deriv2(p: f64, z: f64) -> f64 {
    let a = z.abs();
    if a < 1e-300 {
        return 0.0;
    }
    p * (p - 1.0) * z.signum() * ((p - 2.0) * a.ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderForm {
    Direct,
    TaylorIntegral,
}

/// Quadratic remainder `F(x0 + x) - F'(x0) x - F(x0)`.
pub fn nonlin_remainder(p: f64, x0: f64, x: f64, form: RemainderForm) -> Result<f64> {
    match form {
        RemainderForm::Direct => {
            Ok(power_nonlinearity(p, x0 + x) - power_nonlinearity_deriv(p, x0) * x - power_nonlinearity(p, x0))
        }
        RemainderForm::TaylorIntegral => {
            if x == 0.0 {
                return Ok(0.0);
            }
            let crosses = x0 == 0.0 || (x0 + x) == 0.0 || x0.signum() != (x0 + x).signum();
            if crosses && p < 2.0 {
                return Err(Error::Singular(format!("path x0 + t x crosses 0 (x0 = {x0}, x = {x}) with p = {p} < 2")));
            }
            let rule = GaussLegendre::new(32);
            let integral = rule.integrate(0.0, 1.0, |t| power_nonlinearity_deriv2(p, x0 + t * x) * (1.0 - t));
            Ok(x * x * integral)
        }
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn boost_mode_is_beta_derivative() {
        // f_{0,beta,i} = -d/dbeta_i of the boosted profile.
        let params = ModelParams::new(1, 3.0, 2, 1.0).unwrap();
        let (b, h) = (0.2, 1e-5);
        for xi in [-0.7, 0.0, 0.4] {
            let (p1, q1) = boosted_profile(&params, &[b + h], &[xi]).unwrap();
            let (p0, q0) = boosted_profile(&params, &[b - h], &[xi]).unwrap();
            let (m1, m2) = symmetry_mode_at(&params, &[b], SymmetryMode::Boost(0), &[xi]).unwrap();
            assert!((m1 + (p1 - p0) / (2.0 * h)).abs() < 1e-8);
            assert!((m2 + (q1 - q0) / (2.0 * h)).abs() < 1e-8);
        }
    }

    use super::*;

    fn p3() -> ModelParams {
        ModelParams::new(1, 3.0, 2, 1.0).unwrap()
    }

    #[test]
    fn constants() {
        let (s, c, w) = scaling_constants(3.0).unwrap();
        assert_eq!((s, w), (1.0, 1.0));
        assert!((c - 2f64.sqrt()).abs() < 1e-15);
        let (s, c, w) = scaling_constants(2.0).unwrap();
        assert_eq!((s, w), (2.0, 1.0));
        assert!((c - 6.0).abs() < 1e-13);
        let (s, c, w) = scaling_constants(5.0).unwrap();
        assert_eq!((s, w), (0.5, 0.5));
        assert!((c - 0.930_604_859_1).abs() < 1e-10);
        assert!(scaling_constants(1.0).is_err());
        assert!(scaling_constants(0.5).is_err());
    }

    #[test]
    fn regularity_flag() {
        assert!(ModelParams::new(3, 3.0, 2, 1.0).unwrap().regularity_ok());
        assert!(!ModelParams::new(4, 3.0, 2, 1.0).unwrap().regularity_ok());
    }

    #[test]
    fn gamma_values() {
        assert_eq!(lorentz_factor(&[0.0, 0.0]).unwrap(), 1.0);
        assert!((lorentz_factor(&[0.6]).unwrap() - 1.25).abs() < 1e-15);
        assert!((lorentz_factor(&[0.0, 0.8]).unwrap() - 5.0 / 3.0).abs() < 1e-14);
        assert!(lorentz_factor(&[1.0]).is_err());
        assert!(lorentz_factor(&[0.8, 0.8]).is_err());
    }

    #[test]
    fn blowup_values() {
        let prm = p3();
        let (psi, dpsi) = blowup_field(&prm, &Boost::unboosted(1), 0.0, &[0.0]).unwrap();
        assert!((psi - 2f64.sqrt()).abs() < 1e-15 && (dpsi - 2f64.sqrt()).abs() < 1e-15);
        let b = Boost::new(vec![0.5], 1.0).unwrap();
        let (psi, _) = blowup_field(&prm, &b, 0.0, &[0.0]).unwrap();
        assert!((psi - 2f64.sqrt() * 0.75f64.sqrt()).abs() < 1e-14);
        assert!(blowup_field(&prm, &Boost::unboosted(1), 1.0, &[0.0]).is_err());
        assert!(blowup_field(&prm, &b, 0.0, &[-2.0]).is_err());
    }

    #[test]
    fn boost_admissibility() {
        assert!(check_boost_on_ball(&[0.5], 1.0, None).is_ok());
        assert!(check_boost_on_ball(&[0.5], 2.0, None).is_err());
        assert!(check_boost_on_ball(&[0.5], 2.0, Some(1.5)).is_ok());
    }

    #[test]
    fn unboosted_modes() {
        let prm = p3();
        let r2 = 2f64.sqrt();
        let (a, b) = symmetry_mode_at(&prm, &[0.0], SymmetryMode::Time, &[0.3]).unwrap();
        assert!((a - r2).abs() < 1e-15 && (b - 2.0 * r2).abs() < 1e-14);
        let (a, b) = symmetry_mode_at(&prm, &[0.0], SymmetryMode::Boost(0), &[0.3]).unwrap();
        assert!((a - 0.3 * r2).abs() < 1e-15 && (b - 0.6 * r2).abs() < 1e-14);
        assert!(symmetry_mode_at(&prm, &[0.0], SymmetryMode::Boost(1), &[0.3]).is_err());
    }

    #[test]
    fn remainder_basics() {
        assert_eq!(nonlin_remainder(3.0, 1.0, 0.0, RemainderForm::Direct).unwrap(), 0.0);
        assert_eq!(nonlin_remainder(3.0, 1.0, 0.0, RemainderForm::TaylorIntegral).unwrap(), 0.0);
        let v = nonlin_remainder(3.0, 1.0, 0.1, RemainderForm::Direct).unwrap();
        assert!((v - 0.031).abs() < 1e-14);
        let t = nonlin_remainder(3.0, 1.0, 0.1, RemainderForm::TaylorIntegral).unwrap();
        assert!((t - 0.031).abs() < 1e-14);
        assert!(nonlin_remainder(1.5, 0.2, -0.5, RemainderForm::TaylorIntegral).is_err());
        assert!(nonlin_remainder(3.0, 0.2, -0.5, RemainderForm::TaylorIntegral).is_ok());
    }

    #[test]
    fn power_sign_and_guard() {
        assert_eq!(power_nonlinearity(2.5, 0.0), 0.0);
        assert_eq!(power_nonlinearity(2.5, 1e-301), 0.0);
        assert!((power_nonlinearity(3.0, -2.0) + 8.0).abs() < 1e-13);
        assert!((power_nonlinearity(2.5, 4.0) - 32.0).abs() < 1e-12);
    }
}
