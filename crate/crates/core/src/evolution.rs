//! Nonlinear evolution of the perturbation of the boosted blowup in
//! similarity variables, extraction of the unstable amplitudes, the
//! `(beta, T)` fit that removes them and reconstruction of the physical
//! solution.
//!
//! With `tau = log(T / (T - t))` and `xi = x / (T - t)`, the solution is
//! `psi = psi*_{beta,T} + (T - t)^{-s} u1(tau, xi)` and the perturbation obeys
//! `u' = L_beta u + N_beta(u)` with
//! `N_beta(u) = (0, F(f* + u1) - F(f*) - F'(f*) u1)`.
//!
//! `Line` runs evolve `d = 1` with a boost; `Radial(0)` runs evolve radial
//! data in any `d >= 2` with `beta = 0`.

use faer::linalg::solvers::Solve;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{
    blowup_field, boosted_profile, check_boost_on_ball, nonlin_remainder, Boost, FieldPair, ModelParams, RemainderForm,
    SymmetryMode,
};
use crate::spectral::{
    assemble_l, interpolation_matrix, log_slope, riesz_projection, symmetry_vector, Discretization, GridMode,
    OperatorMatrix,
};

/// Early termination once the norm exceeds this multiple of its initial value.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// Largest accepted condition number of the mode Gram matrix.
pub const MAX_GAMMA_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub params: ModelParams,
    pub mode: GridMode,
    pub n: usize,
    /// `dtau = dt_factor / N^2`.
    pub dt_factor: f64,
    pub tau_end: f64,
    /// Spacing of recorded samples.
    pub sample_dt: f64,
    pub linearized: bool,
    pub filter: bool,
}

impl EvolutionConfig {
    pub fn new(params: ModelParams, mode: GridMode, n: usize) -> Self {
        Self { params, mode, n, dt_factor: 2.0, tau_end: 8.0, sample_dt: 0.05, linearized: false, filter: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_factor > 0.0 && self.dt_factor <= 4.0) {
            return invalid(format!("dt_factor = {} outside (0, 4]", self.dt_factor));
        }
        if !(self.tau_end > 0.0) || !self.tau_end.is_finite() {
            return invalid(format!("tau_end = {} must be positive", self.tau_end));
        }
        if !(self.sample_dt > 0.0) {
            return invalid("sample spacing must be positive");
        }
        match self.mode {
            GridMode::Line if self.params.d != 1 => invalid("line evolution needs d = 1"),
            GridMode::Radial(0) if self.params.d >= 2 => Ok(()),
            GridMode::Radial(_) => invalid("radial evolution needs d >= 2 and mode l = 0"),
            GridMode::Line => Ok(()),
        }
    }

    pub fn discretization(&self) -> Result<Discretization> {
        Discretization::new(self.mode, self.n, self.params.r)
    }

    pub fn dtau(&self) -> f64 {
        self.dt_factor / (self.n * self.n) as f64
    }

    /// Boost dimension of the fitted parameters.
    pub fn boost_dim(&self) -> usize {
        match self.mode {
            GridMode::Line => 1,
            GridMode::Radial(_) => 0,
        }
    }

    fn full_beta(&self, beta: &[f64]) -> Vec<f64> {
        match self.mode {
            GridMode::Line => beta.to_vec(),
            GridMode::Radial(_) => vec![0.0; self.params.d],
        }
    }
}

/// Physical point of a grid node: `(xi)` on the line, `(rho, 0, ..)` for radial runs.
fn physical_point(d: usize, mode: GridMode, node: f64) -> Vec<f64> {
    match mode {
        GridMode::Line => vec![node],
        GridMode::Radial(_) => {
            let mut x = vec![0.0; d];
            x[0] = node;
            x
        }
    }
}

/// Perturbations `(f, g)` of the unboosted data `(psi*_{0,1}, d_t psi*_{0,1})` at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    Zero,
    /// `f = A exp(-|x - x0|^2 / w^2)`, `g = velocity * f`.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: f64,
        velocity: f64,
    },
    /// `f = A sum c_j x1^j`, `g = A sum e_j x1^j` with seeded coefficients in `[-1, 1]`.
    Polynomial {
        amplitude: f64,
        f: Vec<f64>,
        g: Vec<f64>,
    },
    /// Difference between the blowup with `(beta0, T0)` and the unboosted one with `T = 1`.
    ExactBoost {
        beta0: Vec<f64>,
        t0: f64,
    },
}

impl Perturbation {
    pub fn polynomial(amplitude: f64, degree: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        Perturbation::Polynomial { amplitude, f, g }
    }

    pub fn sample(&self, params: &ModelParams, x: &[f64]) -> Result<(f64, f64)> {
        match self {
            Perturbation::Zero => Ok((0.0, 0.0)),
            Perturbation::Gaussian { amplitude, width, center, velocity } => {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let c = if i == 0 { *center } else { 0.0 };
                        (v - c) * (v - c)
                    })
                    .sum();
                let f = amplitude * (-r2 / (width * width)).exp();
                Ok((f, velocity * f))
            }
            Perturbation::Polynomial { amplitude, f, g } => {
                let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, v| acc * x[0] + v);
                Ok((amplitude * horner(f), amplitude * horner(g)))
            }
            Perturbation::ExactBoost { beta0, t0 } => {
                let mut b = beta0.clone();
                b.resize(x.len(), 0.0);
                let (psi, dpsi) = blowup_field(params, &Boost::new(b, *t0)?, 0.0, x)?;
                let (psi1, dpsi1) = blowup_field(params, &Boost::unboosted(x.len()), 0.0, x)?;
                Ok((psi - psi1, dpsi - dpsi1))
            }
        }
    }
}

/// `u(0) = f^T + f_0^T - f*_beta` on the grid, `f^T(xi) = (T^s f(T xi), T^{s+1} g(T xi))`.
pub fn build_initial_data(
    config: &EvolutionConfig,
    disc: &Discretization,
    data: &Perturbation,
    beta: &[f64],
    t_blow: f64,
) -> Result<FieldPair<Vec<f64>>> {
    let params = &config.params;
    let s = params.s_p;
    if !(t_blow > 0.0) {
        return invalid(format!("T = {t_blow} must be positive"));
    }
    let full_beta = config.full_beta(beta);
    let mut out = FieldPair::zeros(disc.n);
    for (i, &node) in disc.nodes.iter().enumerate() {
        let xi = physical_point(params.d, config.mode, node);
        let x: Vec<f64> = xi.iter().map(|v| t_blow * v).collect();
        // Unboosted blowup at t = 0 plus the perturbation, rescaled.
        let (psi0, dpsi0) = blowup_field(params, &Boost::unboosted(params.d), 0.0, &x)?;
        let (f, g) = data.sample(params, &x)?;
        let (p1, p2) = boosted_profile(params, &full_beta, &xi)?;
        // Distance to the singular hyperplane of the target blowup.
        let plane = t_blow + full_beta.iter().zip(&x).map(|(b, y)| b * y).sum::<f64>();
        if !(plane > 0.0) {
            return Err(Error::Singular(format!("T + beta.x = {plane} at node {i}")));
        }
        out.f1[i] = t_blow.powf(s) * (psi0 + f) - p1;
        out.f2[i] = t_blow.powf(s + 1.0) * (dpsi0 + g) - p2;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes {
    /// Coefficients along the boost modes `f_{0,beta,i}`.
    pub a0: Vec<f64>,
    /// Coefficient along the time mode `f_{1,beta}`.
    pub a1: f64,
}

impl Amplitudes {
    pub fn norm(&self) -> f64 {
        (self.a0.iter().map(|v| v * v).sum::<f64>() + self.a1 * self.a1).sqrt()
    }
}

/// Dual basis of the unstable modes: `a = Gamma^{-1} [(m_j | P u)_G]_j`.
#[derive(Debug, Clone)]
pub struct UnstableBasis {
    pub modes: Vec<Vec<f64>>,
    /// `P = P_0 + P_1` (radial runs: `P_1` only).
    pub projection: Mat<f64>,
    pub gamma_condition: f64,
    extract: Mat<f64>,
}

pub fn unstable_basis(op: &OperatorMatrix) -> Result<UnstableBasis> {
    let dim = op.dim();
    let (modes, projection) = match op.meta.mode {
        GridMode::Line => {
            let p0 = riesz_projection(op, 0.0, 1e-3)?;
            let p1 = riesz_projection(op, 1.0, 1e-3)?;
            let modes = vec![symmetry_vector(op, SymmetryMode::Boost(0))?, symmetry_vector(op, SymmetryMode::Time)?];
            (modes, &p0.matrix + &p1.matrix)
        }
        GridMode::Radial(0) => {
            let p1 = riesz_projection(op, 1.0, 1e-3)?;
            (vec![symmetry_vector(op, SymmetryMode::Time)?], p1.matrix)
        }
        GridMode::Radial(l) => return invalid(format!("no unstable basis for radial mode l = {l}")),
    };
    let m = modes.len();
    let gm: Vec<Vec<f64>> =
        modes.iter().map(|v| (0..dim).map(|i| (0..dim).map(|j| op.gram[(i, j)] * v[j]).sum()).collect()).collect();
    let gamma = Mat::from_fn(m, m, |i, j| gm[i].iter().zip(&modes[j]).map(|(a, b)| a * b).sum::<f64>());
    let sv = gamma.singular_values().map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let cond = sv.iter().copied().fold(0.0, f64::max) / sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(cond <= MAX_GAMMA_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let rows = Mat::from_fn(m, dim, |i, j| gm[i][j]);
    let rows_p = &rows * &projection;
    let extract = gamma.partial_piv_lu().solve(&rows_p);
    Ok(UnstableBasis { modes, projection, gamma_condition: cond, extract })
}

pub fn unstable_amplitudes(basis: &UnstableBasis, state: &[f64]) -> Amplitudes {
    let m = basis.modes.len();
    let c: Vec<f64> = (0..m).map(|i| (0..state.len()).map(|j| basis.extract[(i, j)] * state[j]).sum()).collect();
    Amplitudes { a0: c[..m - 1].to_vec(), a1: c[m - 1] }
}

/// Operators for `||d^s u1||` on the unit of the similarity ball, `s = 0..=k`.
#[derive(Debug, Clone)]
struct SeminormOps {
    mats: Vec<Mat<f64>>,
    weights: Vec<f64>,
}

impl SeminormOps {
    fn new(disc: &Discretization, d: usize, k: usize) -> Self {
        match disc.mode {
            GridMode::Line => {
                let mut mats = vec![Mat::<f64>::identity(disc.n, disc.n)];
                for s in 1..=k {
                    mats.push(&disc.diff1 * &mats[s - 1]);
                }
                Self { mats, weights: disc.quad_weights.clone() }
            }
            GridMode::Radial(_) => {
                // Resample g(rho^2) on a Chebyshev grid in rho on [0, R], exact for the polynomial.
                let m = 2 * disc.n;
                let rg = Discretization::new(GridMode::Line, m, disc.r.max(1.0)).expect("valid grid");
                let rho: Vec<f64> = rg.coords.iter().map(|x| 0.5 * (x + disc.r)).collect();
                let z: Vec<f64> = rho.iter().map(|r| r * r).collect();
                let interp = interpolation_matrix(&disc.coords, &z);
                let dr = Mat::from_fn(m, m, |i, j| 2.0 * rg.diff1[(i, j)]);
                let weights: Vec<f64> = (0..m).map(|i| 0.5 * rg.quad_weights[i] * rho[i].powi(d as i32 - 1)).collect();
                let mut mats = vec![interp];
                for s in 1..=k {
                    mats.push(&dr * &mats[s - 1]);
                }
                Self { mats, weights }
            }
        }
    }

    fn eval(&self, u1: &[f64]) -> Vec<f64> {
        self.mats
            .iter()
            .map(|m| {
                let mut acc = 0.0;
                for i in 0..m.nrows() {
                    let v: f64 = (0..m.ncols()).map(|j| m[(i, j)] * u1[j]).sum();
                    acc += self.weights[i] * v * v;
                }
                acc.max(0.0).sqrt()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau_samples: Vec<f64>,
    pub states: Vec<FieldPair<Vec<f64>>>,
    /// Working (Gram) norm of each sample.
    pub hk_norms: Vec<f64>,
    /// `||d^s u1||_{L^2}` for `s = 0..=k`, per sample.
    pub seminorms: Vec<Vec<f64>>,
    pub amplitudes: Vec<Amplitudes>,
    pub beta: Vec<f64>,
    /// Set when the run stopped early on norm growth.
    pub terminated: Option<String>,
}

impl Trajectory {
    /// Cubic Lagrange interpolation between uniformly spaced samples.
    pub fn state_at(&self, tau: f64) -> Result<FieldPair<Vec<f64>>> {
        let n = self.tau_samples.len();
        let (t0, t_last) = (self.tau_samples[0], self.tau_samples[n - 1]);
        if !(tau >= t0 && tau <= t_last + 1e-12) {
            return invalid(format!("tau = {tau} outside the recorded range [{t0}, {t_last}]"));
        }
        if n < 4 {
            let i = self.tau_samples.iter().position(|t| (t - tau).abs() < 1e-12);
            return i.map(|i| self.states[i].clone()).ok_or_else(|| Error::InvalidParameter("too few samples".into()));
        }
        let h = self.tau_samples[1] - t0;
        let pos = ((tau - t0) / h).floor() as isize;
        let start = (pos - 1).clamp(0, n as isize - 4) as usize;
        let idx: Vec<usize> = (start..start + 4).collect();
        let w: Vec<f64> = idx
            .iter()
            .map(|&i| {
                idx.iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (tau - self.tau_samples[j]) / (self.tau_samples[i] - self.tau_samples[j]))
                    .product()
            })
            .collect();
        let len = self.states[0].len();
        let mut out = FieldPair::zeros(len);
        for (wi, &i) in w.iter().zip(&idx) {
            out.axpy(*wi, &self.states[i]);
        }
        Ok(out)
    }
}

/// Right-hand side `L_beta u + N_beta(u)` on a fixed grid.
pub struct Evolver {
    n: usize,
    p: f64,
    linearized: bool,
    matrix: Vec<f64>,
    fstar: Vec<f64>,
    filter: Option<Vec<f64>>,
    pub op: OperatorMatrix,
}

impl Evolver {
    pub fn new(config: &EvolutionConfig, beta: &[f64]) -> Result<Self> {
        config.validate()?;
        let disc = config.discretization()?;
        let full_beta = config.full_beta(beta);
        let op = assemble_l(&config.params, &full_beta, &disc)?;
        let n = disc.n;
        let dim = 2 * n;
        let matrix: Vec<f64> =
            (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| op.matrix[(i, j)]).collect();
        let mut fstar = Vec::with_capacity(n);
        for &node in &disc.nodes {
            let xi = physical_point(config.params.d, config.mode, node);
            fstar.push(boosted_profile(&config.params, &full_beta, &xi)?.0);
        }
        let filter = config.filter.then(|| {
            let f = disc.filter_matrix();
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| f[(i, j)]).collect()
        });
        Ok(Self { n, p: config.params.p, linearized: config.linearized, matrix, fstar, filter, op })
    }

    pub fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let dim = 2 * self.n;
        for (i, o) in out.iter_mut().enumerate().take(dim) {
            let row = &self.matrix[i * dim..(i + 1) * dim];
            *o = row.iter().zip(u).map(|(a, b)| a * b).sum();
        }
        if !self.linearized {
            for i in 0..self.n {
                // Direct form is exact at u1 = 0.
                out[self.n + i] +=
                    nonlin_remainder(self.p, self.fstar[i], u[i], RemainderForm::Direct).unwrap_or(f64::NAN);
            }
        }
    }

    fn apply_filter(&self, u: &mut [f64]) {
        let Some(f) = &self.filter else { return };
        let n = self.n;
        for half in [0, n] {
            let v: Vec<f64> = u[half..half + n].to_vec();
            for i in 0..n {
                u[half + i] = f[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| a * b).sum();
            }
        }
    }

    fn rk4_step(&self, u: &mut [f64], dt: f64, scratch: &mut [Vec<f64>; 5]) {
        let dim = u.len();
        let [k1, k2, k3, k4, tmp] = scratch;
        self.rhs(u, k1);
        for i in 0..dim {
            tmp[i] = u[i] + 0.5 * dt * k1[i];
        }
        self.rhs(tmp, k2);
        for i in 0..dim {
            tmp[i] = u[i] + 0.5 * dt * k2[i];
        }
        self.rhs(tmp, k3);
        for i in 0..dim {
            tmp[i] = u[i] + dt * k3[i];
        }
        self.rhs(tmp, k4);
        for i in 0..dim {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.apply_filter(u);
    }
}

/// Classical RK4 marching to `tau_end`, recording samples every `sample_dt`.
pub fn evolve(u0: &FieldPair<Vec<f64>>, beta: &[f64], config: &EvolutionConfig) -> Result<Trajectory> {
    let ev = Evolver::new(config, beta)?;
    let basis = unstable_basis(&ev.op)?;
    evolve_with(&ev, &basis, u0, config)
}

pub fn evolve_with(
    ev: &Evolver,
    basis: &UnstableBasis,
    u0: &FieldPair<Vec<f64>>,
    config: &EvolutionConfig,
) -> Result<Trajectory> {
    let mut u = u0.to_stacked();
    if u.len() != ev.op.dim() {
        return Err(Error::DimensionMismatch(ev.op.dim(), u.len()));
    }
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { tau: 0.0, index: i, last_good: 0.0 });
    }
    let semi = SeminormOps::new(&ev.op.disc, config.params.d, config.params.k);
    let steps_per_sample = (config.sample_dt / config.dtau()).ceil().max(1.0) as usize;
    let dt = config.sample_dt / steps_per_sample as f64;
    let n_samples = (config.tau_end / config.sample_dt).round().max(1.0) as usize;
    let mut traj = Trajectory {
        tau_samples: Vec::with_capacity(n_samples + 1),
        states: Vec::with_capacity(n_samples + 1),
        hk_norms: Vec::with_capacity(n_samples + 1),
        seminorms: Vec::with_capacity(n_samples + 1),
        amplitudes: Vec::with_capacity(n_samples + 1),
        beta: ev.op.meta.beta.clone(),
        terminated: None,
    };
    let record = |traj: &mut Trajectory, tau: f64, u: &[f64]| {
        let fp = FieldPair::from_stacked(u);
        traj.tau_samples.push(tau);
        traj.hk_norms.push(ev.op.norm(u));
        traj.seminorms.push(semi.eval(&fp.f1));
        traj.amplitudes.push(unstable_amplitudes(basis, u));
        traj.states.push(fp);
    };
    record(&mut traj, 0.0, &u);
    let initial = traj.hk_norms[0];
    let mut scratch: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; u.len()]);
    let mut last_good = 0.0;
    for k in 1..=n_samples {
        for _ in 0..steps_per_sample {
            ev.rk4_step(&mut u, dt, &mut scratch);
        }
        let tau = k as f64 * config.sample_dt;
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { tau, index: i, last_good });
        }
        last_good = tau;
        record(&mut traj, tau, &u);
        let norm = *traj.hk_norms.last().expect("recorded");
        if initial > 0.0 && norm > BLOWUP_FACTOR * initial {
            traj.terminated = Some(format!("norm {norm:e} exceeded {BLOWUP_FACTOR:e} x initial at tau = {tau}"));
            break;
        }
    }
    Ok(traj)
}

/// Least-squares slope of `log ||u||` over the samples in `[tau_lo, tau_hi]`.
pub fn decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    decay_rate_of(&traj.tau_samples, &traj.hk_norms, window)
}

pub fn decay_rate_of(taus: &[f64], norms: &[f64], window: (f64, f64)) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = taus
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t >= window.0 - 1e-12 && **t <= window.1 + 1e-12)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if x.len() < 10 {
        return invalid(format!("only {} samples in the decay window", x.len()));
    }
    log_slope(&x, &y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub tau_probe: f64,
    /// Converged once `|a0| + |a1| e^{-tau_probe}` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Radius of the admissible parameter ball around `(0, 1)`.
    pub delta: f64,
    pub fd_step: f64,
    pub beta_init: Vec<f64>,
    pub t_init: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tau_probe: 6.0, tol: 1e-12, max_iter: 20, delta: 0.2, fd_step: 1e-6, beta_init: vec![], t_init: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitIteration {
    pub iter: usize,
    pub beta: Vec<f64>,
    pub t_blow: f64,
    pub amp_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_star: Vec<f64>,
    pub t_star: f64,
    pub iterations: usize,
    /// Iterations of the initial-data pass.
    pub presolve_iterations: usize,
    pub final_amplitudes: Amplitudes,
    pub history: Vec<FitIteration>,
    /// Evolution from the fitted parameters to `config.tau_end`.
    pub trajectory: Trajectory,
}

type SetupCache = std::cell::RefCell<Vec<(Vec<f64>, std::rc::Rc<(Evolver, UnstableBasis)>)>>;

struct AmplitudeMap<'a> {
    config: &'a EvolutionConfig,
    data: &'a Perturbation,
    probe: EvolutionConfig,
    disc: Discretization,
    /// Operators and bases keyed by the boost; `T` does not enter `L_beta`.
    cache: SetupCache,
}

impl AmplitudeMap<'_> {
    fn setup(&self, beta: &[f64]) -> Result<std::rc::Rc<(Evolver, UnstableBasis)>> {
        if let Some((_, e)) = self.cache.borrow().iter().find(|(b, _)| b.as_slice() == beta) {
            return Ok(e.clone());
        }
        let ev = Evolver::new(&self.probe, beta)?;
        let basis = unstable_basis(&ev.op)?;
        let entry = std::rc::Rc::new((ev, basis));
        let mut cache = self.cache.borrow_mut();
        if cache.len() >= 8 {
            cache.remove(0);
        }
        cache.push((beta.to_vec(), entry.clone()));
        Ok(entry)
    }

    /// `(a0(tau_p), a1(tau_p) e^{-tau_p})` after evolving the data fitted with `(beta, T)`;
    /// `tau_p = 0` reads the amplitudes of the initial data.
    fn eval(&self, x: &[f64], evolve_to_probe: bool) -> Result<(Vec<f64>, Amplitudes)> {
        let nb = self.config.boost_dim();
        let (beta, t) = (&x[..nb], x[nb]);
        check_boost_on_ball(&self.config.full_beta(beta), self.config.params.r, None)?;
        let u0 = build_initial_data(self.config, &self.disc, self.data, beta, t)?;
        let entry = self.setup(beta)?;
        let (ev, basis) = (&entry.0, &entry.1);
        let (a, tau) = if evolve_to_probe {
            let traj = evolve_with(ev, basis, &u0, &self.probe)?;
            if let Some(msg) = &traj.terminated {
                return Err(Error::NoConvergence(format!("evolution blew up during the fit: {msg}")));
            }
            (traj.amplitudes.last().expect("non-empty").clone(), self.probe.tau_end)
        } else {
            (unstable_amplitudes(basis, &u0.to_stacked()), 0.0)
        };
        let mut r = a.a0.clone();
        r.push(a.a1 * (-tau).exp());
        Ok((r, a))
    }
}

fn residual_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v.abs()).sum()
}

struct NewtonOutcome {
    x: Vec<f64>,
    amplitudes: Amplitudes,
    history: Vec<FitIteration>,
    converged: bool,
}

/// Damped chord-Newton on the amplitude map; failed evaluations shrink the step.
fn damped_newton(map: &AmplitudeMap, x0: Vec<f64>, evolve_to_probe: bool, opts: &FitOptions) -> Result<NewtonOutcome> {
    let nb = map.config.boost_dim();
    let m = nb + 1;
    let in_ball = |x: &[f64]| {
        let b: f64 = x[..nb].iter().map(|v| v * v).sum::<f64>().sqrt();
        b <= opts.delta && (x[nb] - 1.0).abs() <= opts.delta
    };
    let record = |iter: usize, x: &[f64], r: &[f64]| FitIteration {
        iter,
        beta: x[..nb].to_vec(),
        t_blow: x[nb],
        amp_norm: residual_norm(r),
    };
    let mut x = x0;
    let (mut r, mut amps) = map.eval(&x, evolve_to_probe)?;
    let mut history = vec![record(0, &x, &r)];
    let mut jac: Option<Mat<f64>> = None;
    let mut iter = 0;
    while residual_norm(&r) >= opts.tol {
        if iter >= opts.max_iter {
            return Ok(NewtonOutcome { x, amplitudes: amps, history, converged: false });
        }
        iter += 1;
        let fresh = jac.is_none();
        if fresh {
            let mut j = Mat::<f64>::zeros(m, m);
            for c in 0..m {
                let mut xp = x.clone();
                xp[c] += opts.fd_step;
                let (rp, _) = map.eval(&xp, evolve_to_probe)?;
                for row in 0..m {
                    j[(row, c)] = (rp[row] - r[row]) / opts.fd_step;
                }
            }
            jac = Some(j);
        }
        let j = jac.as_ref().expect("jacobian");
        let rhs = Mat::from_fn(m, 1, |i, _| -r[i]);
        let step = j.partial_piv_lu().solve(&rhs);
        let full: Vec<f64> = (0..m).map(|i| x[i] + step[(i, 0)]).collect();
        if !in_ball(&full) {
            return invalid(format!(
                "fit left the parameter ball of radius {} (beta = {:?}, T = {})",
                opts.delta,
                &full[..nb],
                full[nb]
            ));
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let xn: Vec<f64> = (0..m).map(|i| x[i] + lambda * step[(i, 0)]).collect();
            if let Ok((rn, an)) = map.eval(&xn, evolve_to_probe) {
                if residual_norm(&rn) < residual_norm(&r) {
                    accepted = Some((xn, rn, an));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((xn, rn, an)) = accepted else {
            if fresh {
                return Ok(NewtonOutcome { x, amplitudes: amps, history, converged: false });
            }
            // Stale chord: retry from the same point with a fresh Jacobian.
            jac = None;
            iter -= 1;
            continue;
        };
        // Slow contraction: refresh the Jacobian.
        if residual_norm(&rn) > 0.1 * residual_norm(&r) {
            jac = None;
        }
        x = xn;
        r = rn;
        amps = an;
        history.push(record(iter, &x, &r));
    }
    Ok(NewtonOutcome { x, amplitudes: amps, history, converged: true })
}

/// Fits `(beta, T)` so that the unstable amplitudes vanish.
///
/// A first pass zeroes the amplitudes of the initial data, which is cheap
/// and exact to leading order; the second pass zeroes the discounted
/// amplitudes at `tau_probe`.
pub fn fit_parameters(data: &Perturbation, config: &EvolutionConfig, opts: &FitOptions) -> Result<FitResult> {
    config.validate()?;
    let nb = config.boost_dim();
    let mut x: Vec<f64> = if opts.beta_init.is_empty() { vec![0.0; nb] } else { opts.beta_init.clone() };
    if x.len() != nb {
        return Err(Error::DimensionMismatch(nb, x.len()));
    }
    x.push(opts.t_init);
    let mut probe = config.clone();
    probe.tau_end = opts.tau_probe;
    probe.sample_dt = opts.tau_probe;
    let map = AmplitudeMap { config, data, probe, disc: config.discretization()?, cache: Default::default() };
    let pre = damped_newton(&map, x, false, opts)?;
    let main = damped_newton(&map, pre.x, true, opts)?;
    if !main.converged {
        let last = main.history.last().map_or(f64::NAN, |h| h.amp_norm);
        return Err(Error::NoConvergence(format!(
            "fit stalled after {} iterations at amplitude {last:e}",
            main.history.len() - 1
        )));
    }
    let beta_star = main.x[..nb].to_vec();
    let t_star = main.x[nb];
    let u0 = build_initial_data(config, &map.disc, data, &beta_star, t_star)?;
    let trajectory = evolve(&u0, &beta_star, config)?;
    Ok(FitResult {
        beta_star,
        t_star,
        iterations: main.history.len() - 1,
        presolve_iterations: pre.history.len() - 1,
        final_amplitudes: main.amplitudes,
        history: main.history,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSlice {
    pub t: f64,
    pub tau: f64,
    /// Physical sample points: `x` on the line, `|x|` for radial runs.
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_star: Vec<f64>,
    /// `(T* - t)^{-d/2 + s_p + s} ||psi - psi*||_{H^s(B_{R(T*-t)})}`, `s = 0..=k`.
    pub rescaled_seminorms: Vec<f64>,
}

/// Physical solution at time `t` on the shrinking ball `B_{R(T* - t)}`.
pub fn reconstruct_physical(
    traj: &Trajectory,
    config: &EvolutionConfig,
    beta_star: &[f64],
    t_star: f64,
    t: f64,
) -> Result<PhysicalSlice> {
    if !(t >= 0.0 && t < t_star) {
        return invalid(format!("t = {t} must lie in [0, T*) with T* = {t_star}"));
    }
    let params = &config.params;
    let s = params.s_p;
    let tau = (t_star / (t_star - t)).ln();
    let state = traj.state_at(tau)?;
    let disc = config.discretization()?;
    let semi = SeminormOps::new(&disc, params.d, params.k);
    let full_beta = config.full_beta(beta_star);
    let boost = Boost::new(full_beta, t_star)?;
    let scale = t_star - t;
    let mut x = Vec::with_capacity(disc.n);
    let mut psi = Vec::with_capacity(disc.n);
    let mut psi_star = Vec::with_capacity(disc.n);
    for (i, &node) in disc.nodes.iter().enumerate() {
        let xi = physical_point(params.d, config.mode, node);
        let pt: Vec<f64> = xi.iter().map(|v| scale * v).collect();
        let (ps, _) = blowup_field(params, &boost, t, &pt)?;
        x.push(scale * node);
        psi_star.push(ps);
        psi.push(ps + scale.powf(-s) * state.f1[i]);
    }
    Ok(PhysicalSlice { t, tau, x, psi, psi_star, rescaled_seminorms: semi.eval(&state.f1) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeminormTable {
    /// Physical times of the rows.
    pub t: Vec<f64>,
    /// `rows[i][s]`: rescaled seminorm of order `s` at `t[i]`.
    pub rows: Vec<Vec<f64>>,
    /// Slope of `log(rescaled seminorm)` against `log(T* - t)` for each order.
    pub slopes: Vec<f64>,
}

/// Rescaled physical seminorms on `n_t` uniformly spaced times in `[t_lo, t_hi]`.
///
/// The rescaling makes the table equal `||d^s u1(tau)||` on the similarity
/// ball, so its log-log slope in `T* - t` is minus the similarity-time rate
/// (a decaying table has a positive slope).
pub fn physical_seminorms(
    traj: &Trajectory,
    config: &EvolutionConfig,
    beta_star: &[f64],
    t_star: f64,
    (t_lo, t_hi): (f64, f64),
    n_t: usize,
) -> Result<SeminormTable> {
    if n_t < 2 || !(t_lo < t_hi) {
        return invalid("need at least two increasing times");
    }
    let mut t = Vec::with_capacity(n_t);
    let mut rows = Vec::with_capacity(n_t);
    for i in 0..n_t {
        let ti = t_lo + (t_hi - t_lo) * i as f64 / (n_t - 1) as f64;
        rows.push(reconstruct_physical(traj, config, beta_star, t_star, ti)?.rescaled_seminorms);
        t.push(ti);
    }
    let x: Vec<f64> = t.iter().map(|ti| (t_star - ti).ln()).collect();
    let slopes = (0..rows[0].len())
        .map(|s| {
            let y: Vec<f64> = rows.iter().map(|r| r[s]).collect();
            log_slope(&x, &y)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SeminormTable { t, rows, slopes })
}
