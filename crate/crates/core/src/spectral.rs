//! Chebyshev collocation of the linearized similarity-variable operator,
//! its unstable spectrum, Riesz projections, a resolvent scan along a
//! vertical line and the decay of the stable semigroup.
//!
//! Two geometries are supported. `Line` discretizes `d = 1` on `[-R, R]`
//! with an arbitrary admissible boost. `Radial(l)` discretizes one
//! spherical-harmonic mode at `beta = 0` in the variable `z = rho^2` on
//! `[0, R^2]`, writing the mode as `rho^l g(z)`; this removes the coordinate
//! singularity at the origin and keeps the parity of the mode exact.
//!
//! No boundary condition is imposed at the outer edge: for `R >= 1` every
//! characteristic leaves the domain there.

use std::f64::consts::PI;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, Side};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{check_boost_on_ball, potential, symmetry_mode, ModelParams, SymmetryMode};
use crate::quad::clenshaw_curtis_weights;

/// Eigenvalues moving less than this under `N -> 2N` count as resolved.
pub const RESOLUTION_TOL: f64 = 1e-6;

/// Normalized left/right pairing below this signals a defective eigenvalue.
pub const PAIRING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// `d = 1` on `[-R, R]`.
    Line,
    /// Spherical-harmonic degree `l`, `beta = 0`, variable `z = rho^2`.
    Radial(usize),
}

impl std::fmt::Display for GridMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridMode::Line => write!(f, "d1_full"),
            GridMode::Radial(l) => write!(f, "radial_mode({l})"),
        }
    }
}

/// Chebyshev-Lobatto grid with dense differentiation matrices.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mode: GridMode,
    pub n: usize,
    pub r: f64,
    /// Physical nodes, increasing: `xi` for `Line`, `rho` for `Radial`.
    pub nodes: Vec<f64>,
    /// Collocation coordinate: `xi` for `Line`, `z = rho^2` for `Radial`.
    pub coords: Vec<f64>,
    /// First and second derivative in the collocation coordinate.
    pub diff1: Mat<f64>,
    pub diff2: Mat<f64>,
    /// Clenshaw-Curtis weights in the collocation coordinate.
    pub quad_weights: Vec<f64>,
}

/// Chebyshev-Lobatto points on `[-1, 1]`, increasing.
pub fn lobatto_points(n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n).map(|j| -(PI * j as f64 / m).cos()).collect()
}

/// Barycentric differentiation matrix on Chebyshev-Lobatto points with the negative-sum diagonal.
pub fn cheb_diff(x: &[f64]) -> Mat<f64> {
    let n = x.len();
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    let mut d = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Barycentric interpolation from Chebyshev-Lobatto values at `coords` to `targets`.
pub fn interpolation_matrix(coords: &[f64], targets: &[f64]) -> Mat<f64> {
    let n = coords.len();
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    let mut m = Mat::<f64>::zeros(targets.len(), n);
    for (i, &x) in targets.iter().enumerate() {
        if let Some(j) = coords.iter().position(|&c| c == x) {
            m[(i, j)] = 1.0;
            continue;
        }
        let terms: Vec<f64> = (0..n).map(|j| w[j] / (x - coords[j])).collect();
        let total: f64 = terms.iter().sum();
        for j in 0..n {
            m[(i, j)] = terms[j] / total;
        }
    }
    m
}

impl Discretization {
    pub fn new(mode: GridMode, n: usize, r: f64) -> Result<Self> {
        if n < 4 {
            return invalid(format!("N = {n} collocation nodes is too few"));
        }
        if !(r >= 1.0) || !r.is_finite() {
            return invalid(format!("R = {r} must be >= 1"));
        }
        let t = lobatto_points(n);
        let (lo, hi) = match mode {
            GridMode::Line => (-r, r),
            GridMode::Radial(_) => (0.0, r * r),
        };
        let half = 0.5 * (hi - lo);
        let coords: Vec<f64> = t.iter().map(|&x| lo + half * (x + 1.0)).collect();
        let mut coords = coords;
        coords[0] = lo;
        coords[n - 1] = hi;
        let mut diff1 = cheb_diff(&t);
        for v in diff1.col_iter_mut() {
            for e in v.iter_mut() {
                *e /= half;
            }
        }
        let diff2 = &diff1 * &diff1;
        let quad_weights = clenshaw_curtis_weights(n).into_iter().rev().map(|w| w * half).collect();
        let nodes = match mode {
            GridMode::Line => coords.clone(),
            GridMode::Radial(_) => coords.iter().map(|z| z.sqrt()).collect(),
        };
        Ok(Self { mode, n, r, nodes, coords, diff1, diff2, quad_weights })
    }

    /// Values to Chebyshev coefficients and back, `T_k` evaluated at the grid.
    fn vandermonde(&self) -> Mat<f64> {
        let t = lobatto_points(self.n);
        Mat::from_fn(self.n, self.n, |j, k| (k as f64 * t[j].acos()).cos())
    }

    /// Exponential filter `exp(-36 eta^8)` on the top tenth of Chebyshev modes,
    /// `eta` running from 0 at the cutoff to 1 at the last mode.
    pub fn filter_matrix(&self) -> Mat<f64> {
        let n = self.n;
        let v = self.vandermonde();
        let vinv = v.partial_piv_lu().inverse();
        let cutoff = ((0.9 * (n - 1) as f64).floor() as usize).max(1);
        let sigma: Vec<f64> = (0..n)
            .map(|k| {
                if k <= cutoff {
                    1.0
                } else {
                    let eta = (k - cutoff) as f64 / (n - 1 - cutoff) as f64;
                    (-36.0 * eta.powi(8)).exp()
                }
            })
            .collect();
        let scaled = Mat::from_fn(n, n, |i, j| sigma[i] * vinv[(i, j)]);
        &v * &scaled
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMeta {
    pub params: ModelParams,
    pub beta: Vec<f64>,
    pub mode: GridMode,
    pub n: usize,
    pub with_potential: bool,
}

/// Dense `2N x 2N` operator acting on stacked `[f1; f2]` grid values.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: Mat<f64>,
    /// Discrete Sobolev form: derivatives `0..=k` on `f1`, `0..k` on `f2`.
    pub gram: Mat<f64>,
    pub meta: OperatorMeta,
    pub disc: Discretization,
}

/// Realizes `L_beta f = (-s f1 - xi.grad f1 + f2, lap f1 - (s+1) f2 - xi.grad f2 + V_beta f1)`.
pub fn assemble_l(params: &ModelParams, beta: &[f64], disc: &Discretization) -> Result<OperatorMatrix> {
    assemble(params, beta, disc, true)
}

/// The free operator, potential removed.
pub fn assemble_free(params: &ModelParams, beta: &[f64], disc: &Discretization) -> Result<OperatorMatrix> {
    assemble(params, beta, disc, false)
}

fn assemble(params: &ModelParams, beta: &[f64], disc: &Discretization, with_potential: bool) -> Result<OperatorMatrix> {
    let n = disc.n;
    let s = params.s_p;
    let x = &disc.coords;
    let d1 = &disc.diff1;
    let d2 = &disc.diff2;
    let mut a = Mat::<f64>::zeros(2 * n, 2 * n);
    match disc.mode {
        GridMode::Line => {
            if params.d != 1 {
                return invalid(format!("d1_full needs d = 1, got d = {}", params.d));
            }
            if beta.len() != 1 {
                return Err(Error::DimensionMismatch(1, beta.len()));
            }
            check_boost_on_ball(beta, disc.r, None)?;
            for i in 0..n {
                let v = if with_potential { potential(params, beta, &[x[i]])? } else { 0.0 };
                for j in 0..n {
                    let adv = -x[i] * d1[(i, j)];
                    let id = if i == j { 1.0 } else { 0.0 };
                    a[(i, j)] = adv - s * id;
                    a[(i, n + j)] = id;
                    a[(n + i, j)] = d2[(i, j)] + v * id;
                    a[(n + i, n + j)] = adv - (s + 1.0) * id;
                }
            }
        }
        GridMode::Radial(ell) => {
            if params.d < 2 {
                return invalid("radial modes need d >= 2");
            }
            if beta.iter().any(|b| *b != 0.0) {
                return invalid("radial modes decouple only at beta = 0");
            }
            let l = ell as f64;
            let dd = params.d as f64;
            let v = if with_potential { params.potential_constant() } else { 0.0 };
            for i in 0..n {
                for j in 0..n {
                    let id = if i == j { 1.0 } else { 0.0 };
                    let adv = -2.0 * x[i] * d1[(i, j)];
                    a[(i, j)] = adv - (s + l) * id;
                    a[(i, n + j)] = id;
                    a[(n + i, j)] = 4.0 * x[i] * d2[(i, j)] + (4.0 * l + 2.0 * dd) * d1[(i, j)] + v * id;
                    a[(n + i, n + j)] = adv - (s + 1.0 + l) * id;
                }
            }
        }
    }
    let gram = sobolev_gram(disc, params.k);
    Ok(OperatorMatrix {
        matrix: a,
        gram,
        meta: OperatorMeta { params: *params, beta: beta.to_vec(), mode: disc.mode, n, with_potential },
        disc: disc.clone(),
    })
}

fn sobolev_gram(disc: &Discretization, k: usize) -> Mat<f64> {
    let n = disc.n;
    let w = &disc.quad_weights;
    let mut g = Mat::<f64>::zeros(2 * n, 2 * n);
    let mut dj = Mat::<f64>::identity(n, n);
    for j in 0..=k {
        let wd = Mat::from_fn(n, n, |r, c| w[r] * dj[(r, c)]);
        let block = dj.transpose() * &wd;
        for r in 0..n {
            for c in 0..n {
                g[(r, c)] += block[(r, c)];
                if j < k {
                    g[(n + r, n + c)] += block[(r, c)];
                }
            }
        }
        dj = &disc.diff1 * &dj;
    }
    // Exact symmetry.
    for r in 0..2 * n {
        for c in 0..r {
            let m = 0.5 * (g[(r, c)] + g[(c, r)]);
            g[(r, c)] = m;
            g[(c, r)] = m;
        }
    }
    g
}

/// `G = L L^T` together with `L^T` and `L^{-T}`.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub lt: Mat<f64>,
    pub lt_inv: Mat<f64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        2 * self.disc.n
    }

    pub fn whitening(&self) -> Result<Whitening> {
        let llt = self
            .gram
            .llt(Side::Lower)
            .map_err(|e| Error::LinAlg(format!("Gram matrix is not numerically positive definite: {e:?}")))?;
        let l = llt.L().to_owned();
        let lt = l.transpose().to_owned();
        let lt_inv = lt.partial_piv_lu().inverse();
        Ok(Whitening { lt, lt_inv })
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(i, ui)| ui * v.iter().enumerate().map(|(j, vj)| self.gram[(i, j)] * vj).sum::<f64>())
            .sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)] * u[j]).sum()).collect()
    }

    /// Reassembles the same operator on a different number of nodes.
    pub fn refined(&self, n: usize) -> Result<OperatorMatrix> {
        let disc = Discretization::new(self.meta.mode, n, self.disc.r)?;
        assemble(&self.meta.params, &self.meta.beta, &disc, self.meta.with_potential)
    }
}

/// Operator norm induced by the Gram form.
pub fn gram_norm(w: &Whitening, a: &Mat<f64>) -> Result<f64> {
    let m = &w.lt * a * &w.lt_inv;
    spectral_norm(&m)
}

pub fn spectral_norm(m: &Mat<f64>) -> Result<f64> {
    let sv = m.singular_values().map_err(|e| Error::LinAlg(format!("SVD failed: {e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

fn spectral_norm_c(m: &Mat<c64>) -> Result<f64> {
    let sv = m.singular_values().map_err(|e| Error::LinAlg(format!("SVD failed: {e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenEntry {
    pub value: c64,
    pub resolved: bool,
}

#[derive(Debug, Clone)]
pub struct UnstableEigen {
    pub value: c64,
    pub resolved: bool,
    /// Right eigenvector on the coarse grid, stacked `[f1; f2]`.
    pub vector: Vec<c64>,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub mode: GridMode,
    pub n: usize,
    pub omega0: f64,
    /// Coarse-grid eigenvalues sorted by decreasing real part.
    pub eigenvalues: Vec<EigenEntry>,
    pub unstable: Vec<UnstableEigen>,
}

impl SpectrumReport {
    /// Resolved unstable eigenvalues as real numbers, rounded to the resolution tolerance.
    pub fn unstable_values(&self) -> Vec<f64> {
        self.unstable.iter().filter(|e| e.resolved).map(|e| e.value.re).collect()
    }
}

fn eigen_decomposition(a: &Mat<f64>) -> Result<(Vec<c64>, Mat<c64>)> {
    let e = a.eigen().map_err(|e| Error::LinAlg(format!("eigendecomposition failed: {e:?}")))?;
    let vals: Vec<c64> = e.S().column_vector().iter().copied().collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigenvalues with `Re > omega0`, each flagged by refinement stability under `N -> 2N`.
pub fn unstable_eigs(op: &OperatorMatrix, omega0: f64) -> Result<SpectrumReport> {
    let (vals, vecs) = eigen_decomposition(&op.matrix)?;
    let fine = op.refined(2 * op.disc.n)?;
    let fine_vals = fine.matrix.eigenvalues().map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let moved = |v: c64| fine_vals.iter().map(|w| (v - w).norm()).fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].re.total_cmp(&vals[i].re).then(vals[j].im.total_cmp(&vals[i].im)));
    let mut eigenvalues = Vec::with_capacity(vals.len());
    let mut unstable = Vec::new();
    for i in order {
        let v = vals[i];
        let resolved = moved(v) < RESOLUTION_TOL;
        eigenvalues.push(EigenEntry { value: v, resolved });
        if v.re > omega0 {
            if !resolved {
                return Err(Error::Unresolved { re: v.re, im: v.im });
            }
            unstable.push(UnstableEigen { value: v, resolved, vector: vecs.col(i).iter().copied().collect() });
        }
    }
    Ok(SpectrumReport { mode: op.meta.mode, n: op.disc.n, omega0, eigenvalues, unstable })
}

/// Spectral projection onto the eigenvalues within `radius` of `center`.
#[derive(Debug, Clone)]
pub struct RieszProjection {
    pub center: f64,
    pub rank: usize,
    pub matrix: Mat<f64>,
    /// Smallest singular value of the normalized left/right pairing.
    pub pairing: f64,
}

pub fn riesz_projection(op: &OperatorMatrix, center: f64, radius: f64) -> Result<RieszProjection> {
    let (vals, right) = eigen_decomposition(&op.matrix)?;
    let at = op.matrix.transpose().to_owned();
    let (lvals, left) = eigen_decomposition(&at)?;
    let pick = |vs: &[c64]| -> Vec<usize> {
        (0..vs.len()).filter(|&i| (vs[i] - c64::new(center, 0.0)).norm() < radius).collect()
    };
    let (ri, li) = (pick(&vals), pick(&lvals));
    if ri.is_empty() || ri.len() != li.len() {
        return Err(Error::LinAlg(format!(
            "eigenvalue cluster at {center}: {} right vs {} left eigenvectors",
            ri.len(),
            li.len()
        )));
    }
    let dim = op.dim();
    let m = ri.len();
    let unit = |mat: &Mat<c64>, idx: &[usize]| {
        let mut out = Mat::<c64>::zeros(dim, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            let nrm = mat.col(i).norm_l2();
            for r in 0..dim {
                out[(r, c)] = mat[(r, i)] / nrm;
            }
        }
        out
    };
    let v = unit(&right, &ri);
    let w = unit(&left, &li);
    let wt = w.transpose().to_owned();
    let pair = &wt * &v;
    let sv = pair.singular_values().map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let pairing = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if pairing < PAIRING_TOL {
        return Err(Error::Defective(center, format!("left/right pairing {pairing:e}")));
    }
    let coupled = pair.partial_piv_lu().solve(&wt);
    let p = &v * &coupled;
    let mut real = Mat::<f64>::zeros(dim, dim);
    let mut imag: f64 = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            real[(r, c)] = p[(r, c)].re;
            imag = imag.max(p[(r, c)].im.abs());
        }
    }
    let scale = spectral_norm(&real)?.max(1.0);
    if imag > 1e-8 * scale {
        return Err(Error::LinAlg(format!("projection at {center} has imaginary part {imag:e}")));
    }
    Ok(RieszProjection { center, rank: m, matrix: real, pairing })
}

/// The projections onto the eigenvalues 0 and 1.
pub fn riesz_projections(op: &OperatorMatrix) -> Result<(RieszProjection, RieszProjection)> {
    Ok((riesz_projection(op, 0.0, 1e-3)?, riesz_projection(op, 1.0, 1e-3)?))
}

/// Closed-form symmetry mode sampled on the grid, stacked `[f1; f2]`.
///
/// In radial mode the modes are stored through `g` with `f = rho^l g(rho^2)`:
/// the time mode lives in `l = 0` and each boost mode in `l = 1`, both with constant `g`.
pub fn symmetry_vector(op: &OperatorMatrix, which: SymmetryMode) -> Result<Vec<f64>> {
    let params = &op.meta.params;
    match op.meta.mode {
        GridMode::Line => {
            let pts: Vec<Vec<f64>> = op.disc.nodes.iter().map(|&x| vec![x]).collect();
            Ok(symmetry_mode(params, &op.meta.beta, which, &pts)?.to_stacked())
        }
        GridMode::Radial(ell) => {
            let wanted = match which {
                SymmetryMode::Time => 0,
                SymmetryMode::Boost(_) => 1,
            };
            if ell != wanted {
                return invalid(format!("{:?} does not live in mode l = {ell}", which));
            }
            let (s, c) = (params.s_p, params.c_p);
            let n = op.disc.n;
            let mut v = vec![s * c; n];
            v.extend(std::iter::repeat_n(s * (s + 1.0) * c, n));
            Ok(v)
        }
    }
}

/// Identity minus the given projections.
pub fn complement(dim: usize, projections: &[&Mat<f64>]) -> Mat<f64> {
    let mut q = Mat::<f64>::identity(dim, dim);
    for p in projections {
        q -= *p;
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventRow {
    pub lambda: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventScan {
    pub omega0: f64,
    pub rows: Vec<ResolventRow>,
    pub sup: f64,
    pub argsup: f64,
}

/// `||(z - L)^{-1} Q||` in the Gram norm for `z = omega0 + i lambda`, `lambda` uniform in `[-lambda_max, lambda_max]`.
pub fn resolvent_scan(
    op: &OperatorMatrix,
    q: &Mat<f64>,
    omega0: f64,
    lambda_max: f64,
    n_points: usize,
) -> Result<ResolventScan> {
    if n_points < 2 || !(lambda_max > 0.0) {
        return invalid("resolvent scan needs lambda_max > 0 and at least two points");
    }
    let w = op.whitening()?;
    let dim = op.dim();
    let to_c = |m: &Mat<f64>| Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0));
    let lt = to_c(&w.lt);
    let lt_inv = to_c(&w.lt_inv);
    let qc = to_c(q);
    let lambdas: Vec<f64> =
        (0..n_points).map(|i| -lambda_max + 2.0 * lambda_max * i as f64 / (n_points - 1) as f64).collect();
    let rows: Result<Vec<ResolventRow>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let z = c64::new(omega0, lambda);
            let m = Mat::from_fn(dim, dim, |i, j| {
                let id = if i == j { z } else { c64::new(0.0, 0.0) };
                id - c64::new(op.matrix[(i, j)], 0.0)
            });
            let x = m.partial_piv_lu().solve(&qc);
            if x.col_iter().any(|c| c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
                return Err(Error::Singular(format!("resolvent solve at z = {omega0} + {lambda} i")));
            }
            let norm = spectral_norm_c(&(&lt * &x * &lt_inv))?;
            Ok(ResolventRow { lambda, norm })
        })
        .collect();
    let rows = rows?;
    let (argsup, sup) = rows.iter().fold((0.0, 0.0), |acc, r| if r.norm > acc.1 { (r.lambda, r.norm) } else { acc });
    Ok(ResolventScan { omega0, rows, sup, argsup })
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade approximant.
pub fn expm(a: &Mat<f64>) -> Mat<f64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm1 = (0..n).map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 2f64.powi(-squarings);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let id = Mat::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c: [f64; 4], m: [&Mat<f64>; 4]| {
        Mat::from_fn(n, n, |i, j| c[0] * m[0][(i, j)] + c[1] * m[1][(i, j)] + c[2] * m[2][(i, j)] + c[3] * m[3][(i, j)])
    };
    let u_inner = lin([B[13], B[11], B[9], 0.0], [&a6, &a4, &a2, &id]);
    let u_outer = lin([B[7], B[5], B[3], B[1]], [&a6, &a4, &a2, &id]);
    let u = &a * &(&(&a6 * &u_inner) + &u_outer);
    let v_inner = lin([B[12], B[10], B[8], 0.0], [&a6, &a4, &a2, &id]);
    let v_outer = lin([B[6], B[4], B[2], B[0]], [&a6, &a4, &a2, &id]);
    let v = &(&a6 * &v_inner) + &v_outer;
    let mut r = (&v - &u).partial_piv_lu().solve(&(&v + &u));
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayTable {
    pub taus: Vec<f64>,
    pub norms: Vec<f64>,
    /// Least-squares slope of `log norm` against `tau`.
    pub rate: f64,
}

/// `||e^{tau L} Q||` in the Gram norm on a grid of times.
pub fn semigroup_decay(op: &OperatorMatrix, q: &Mat<f64>, tau_grid: &[f64]) -> Result<DecayTable> {
    let w = op.whitening()?;
    let mut norms = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let a = Mat::from_fn(op.dim(), op.dim(), |i, j| tau * op.matrix[(i, j)]);
        let e = expm(&a);
        norms.push(gram_norm(&w, &(&e * q))?);
    }
    let rate = log_slope(tau_grid, &norms)?;
    Ok(DecayTable { taus: tau_grid.to_vec(), norms, rate })
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return invalid("slope fit needs at least two samples");
    }
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0)) {
        return invalid(format!("non-positive norm {bad} in slope fit"));
    }
    let n = x.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}
