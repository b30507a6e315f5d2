//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use faer::Mat;
use selfsim::energy::{commutator_defect, random_pairs, trace_check, EnergyConfig, MarginProbe};
use selfsim::evolution::{
    decay_rate, fit_parameters, physical_seminorms, reconstruct_physical, EvolutionConfig, FitOptions, Perturbation,
};
use selfsim::hypergeom::{
    connection_residual, elliptic_solve, eval_poly, fundamental_system, mode_ode_coefficients, EllipticSolution,
    ModeSolveRequest, SolveData,
};
use selfsim::model::{blowup_field, Boost, FieldPair, ModelParams, SymmetryMode};
use selfsim::poly::PolyField;
use selfsim::spectral::{
    assemble_l, complement, expm, gram_norm, resolvent_scan, riesz_projections, spectral_norm, symmetry_vector,
    unstable_eigs, Discretization, GridMode, OperatorMatrix,
};

use common::fd_derivs;

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn line_op(p: f64, beta: f64, n: usize) -> Result<OperatorMatrix, String> {
    let params = ok(ModelParams::new(1, p, 2, 1.0))?;
    let disc = ok(Discretization::new(GridMode::Line, n, 1.0))?;
    ok(assemble_l(&params, &[beta], &disc))
}

fn scaled(m: &Mat<f64>, c: f64) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c * m[(i, j)])
}

/// Relative sup-norm distance from `v` to the span of `closed`.
fn eigvec_mismatch(v: &[faer::c64], closed: &[f64]) -> f64 {
    let num: faer::c64 = closed.iter().zip(v).map(|(c, z)| *z * *c).sum();
    let den: f64 = closed.iter().map(|c| c * c).sum();
    let k = num / den;
    let re: Vec<f64> = v.iter().map(|z| (*z / k).re).collect();
    let diff: Vec<f64> = re.iter().zip(closed).map(|(a, b)| a - b).collect();
    sup(&diff) / sup(closed)
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for d in [1usize, 2, 3, 5, 9] {
        let pairs = random_pairs(1000 + d as u64, d, 6, 6, 100);
        for p in [2.0, 3.0, 5.0] {
            let params = ok(ModelParams::new(d, p, 2, 1.0))?;
            for f in &pairs {
                let scale = f.f1.max_abs_coeff().max(f.f2.max_abs_coeff()).max(1.0);
                for mu in 0..=d {
                    let defect = ok(commutator_defect(&params, mu, f))?;
                    worst = worst.max(defect.f1.max_abs_coeff().max(defect.f2.max_abs_coeff()) / scale);
                    checks += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("normalized defect {worst:e}"))?;
    Ok(format!("{checks} checks, max normalized defect {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut checks = 0;
    for d in [1usize, 2, 3, 5, 9] {
        for r in [1.0, 2.0] {
            for f in random_pairs(2000 + d as u64, d, 6, 6, 100) {
                let probe = ok(MarginProbe::new(&f, r, 6))?;
                for p in [2.0, 3.0, 5.0] {
                    for eps1 in [0.05, 0.1, 0.4] {
                        let c = ok(EnergyConfig::new(ok(ModelParams::new(d, p, 6, r))?, eps1))?;
                        for k in 1..=6 {
                            let (margin, norm) = ok(probe.margin(&c, k))?;
                            ensure(margin <= 1e-10 * norm, || {
                                format!("d={d} p={p} R={r} eps1={eps1} k={k}: margin {margin:e}, norm {norm:e}")
                            })?;
                            if norm > 0.0 {
                                worst = worst.max(margin / norm);
                            }
                            checks += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{checks} checks, max margin/norm {worst:.3e}"))
}

fn monomials(d: usize, max_degree: usize) -> Vec<Vec<u8>> {
    let mut all = vec![vec![0u8; d]];
    let mut level = all.clone();
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for e in &level {
            for i in 0..d {
                let mut f = e.clone();
                f[i] += 1;
                next.push(f);
            }
        }
        next.sort();
        next.dedup();
        all.extend(next.iter().cloned());
        level = next;
    }
    all
}

fn criterion_3() -> Outcome {
    let mut checks = 0;
    for d in [1usize, 2, 3, 5] {
        for r in [1.0, 2.0] {
            for e in monomials(d, 8) {
                let t = trace_check(d, r, &PolyField::monomial(d, &e, 1.0));
                ensure(t.holds(0.0), || format!("d={d} R={r} alpha={e:?}: {t:?}"))?;
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} monomials"))
}

fn criterion_4() -> Outcome {
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let (mut worst_res, mut worst_w): (f64, f64) = (0.0, 0.0);
    for d in [2usize, 3, 4, 5, 7] {
        for ell in 0..=4 {
            let res = ok(connection_residual(d, ell, &grid))?;
            ensure(res < 1e-10, || format!("d={d} l={ell}: connection residual {res:e}"))?;
            worst_res = worst_res.max(res);
            for &rho in &[0.1, 0.3, 0.5, 0.7, 0.9, 1.2, 1.6] {
                let v = ok(fundamental_system(d, ell, rho))?;
                let rel = (v.wronskian_numeric() - v.wronskian).abs() / v.wronskian.abs();
                ensure(rel < 1e-8, || format!("d={d} l={ell} rho={rho}: Wronskian mismatch {rel:e}"))?;
                worst_w = worst_w.max(rel);
            }
        }
    }
    Ok(format!("max residual {worst_res:.1e}, max Wronskian mismatch {worst_w:.1e}"))
}

fn criterion_5() -> Outcome {
    let rhos: [f64; 9] = [0.12, 0.2, 0.35, 0.56, 0.8, 0.93, 1.07, 1.4, 1.9];
    let mut worst: f64 = 0.0;
    for d in [2usize, 3, 5] {
        let modes: Vec<(usize, Vec<f64>)> = (0..=3).map(|l| (l, vec![1.0, 0.5, -0.3, 0.2, 0.1])).collect();
        let req = ModeSolveRequest { d, k: 2, r: 2.0, data: SolveData::Modes(modes.clone()) };
        let EllipticSolution::Modes(sols) = ok(elliptic_solve(&req))? else {
            return Err("expected a mode solution".into());
        };
        for (sol, (ell, data)) in sols.iter().zip(&modes) {
            for &rho in &rhos {
                // Stencils stay clear of the light cone and of the solver's patch boundaries.
                let h = (rho / 8.0)
                    .min(0.01)
                    .min((rho - 1.0).abs() / 6.0)
                    .min((rho - 0.5).abs() / 6.0)
                    .min((rho - 0.05) / 6.0);
                let mut err = None;
                let (f, f1, f2) = fd_derivs(
                    |x| {
                        sol.eval(x).unwrap_or_else(|e| {
                            err = Some(e.to_string());
                            f64::NAN
                        })
                    },
                    rho,
                    h,
                );
                if let Some(e) = err {
                    return Err(e);
                }
                let (a2, a1, a0) = mode_ode_coefficients(d, *ell, rho);
                let res = (a2 * f2 + a1 * f1 + a0 * f - eval_poly(data, rho)).abs();
                ensure(res < 1e-8, || format!("d={d} l={ell} rho={rho}: residual {res:e}"))?;
                worst = worst.max(res);
            }
        }
    }
    let req = ModeSolveRequest { d: 1, k: 1, r: 1.0, data: SolveData::Line(vec![1.0]) };
    let EllipticSolution::Line(line) = ok(elliptic_solve(&req))? else {
        return Err("expected a line solution".into());
    };
    let mut line_err: f64 = 0.0;
    for i in 0..=40 {
        line_err = line_err.max((line.eval(-1.0 + 0.05 * i as f64) + 4.0 / 3.0).abs());
    }
    ensure(line_err < 1e-12, || format!("line closed form off by {line_err:e}"))?;
    Ok(format!("max residual {worst:.1e}, line closed form error {line_err:.1e}"))
}

fn criterion_6() -> Outcome {
    let mut worst_vec: f64 = 0.0;
    for (d, p, k) in [(1usize, 3.0, 2usize), (3, 3.0, 2), (5, 3.0, 4), (3, 5.0, 2)] {
        let params = ok(ModelParams::new(d, p, k, 1.0))?;
        let omega0 = params.default_omega0();
        let modes: Vec<GridMode> = if d == 1 { vec![GridMode::Line] } else { (0..=4).map(GridMode::Radial).collect() };
        for mode in modes {
            let disc = ok(Discretization::new(mode, 64, 1.0))?;
            let op = ok(assemble_l(&params, &vec![0.0; d], &disc))?;
            let rep = ok(unstable_eigs(&op, omega0))?;
            let mut vals = rep.unstable_values();
            vals.sort_by(f64::total_cmp);
            let expected: Vec<f64> = match mode {
                GridMode::Line => vec![0.0, 1.0],
                GridMode::Radial(0) => vec![1.0],
                GridMode::Radial(1) => vec![0.0],
                GridMode::Radial(_) => vec![],
            };
            ensure(
                vals.len() == expected.len() && vals.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-6),
                || format!("(d,p,k)=({d},{p},{k}) {mode}: unstable set {vals:?}"),
            )?;
            for e in &rep.unstable {
                let which = if e.value.re > 0.5 { SymmetryMode::Time } else { SymmetryMode::Boost(0) };
                let closed = ok(symmetry_vector(&op, which))?;
                let m = eigvec_mismatch(&e.vector, &closed);
                ensure(m < 1e-6, || format!("(d,p,k)=({d},{p},{k}) {mode}: eigenvector mismatch {m:e}"))?;
                worst_vec = worst_vec.max(m);
            }
        }
    }
    for beta in [0.03, 0.06] {
        let op = line_op(3.0, beta, 64)?;
        let rep = ok(unstable_eigs(&op, op.meta.params.default_omega0()))?;
        let mut vals = rep.unstable_values();
        vals.sort_by(f64::total_cmp);
        ensure(vals.len() == 2 && vals[0].abs() < 1e-6 && (vals[1] - 1.0).abs() < 1e-6, || {
            format!("beta={beta}: unstable set {vals:?}")
        })?;
        for e in &rep.unstable {
            let which = if e.value.re > 0.5 { SymmetryMode::Time } else { SymmetryMode::Boost(0) };
            let m = eigvec_mismatch(&e.vector, &ok(symmetry_vector(&op, which))?);
            ensure(m < 1e-6, || format!("beta={beta}: eigenvector mismatch {m:e}"))?;
            worst_vec = worst_vec.max(m);
        }
    }
    Ok(format!("unstable sets exact, max eigenvector mismatch {worst_vec:.1e}"))
}

/// `(1 / 2 pi i) oint (z - A)^{-1} dz`, trapezoid rule on a circle.
fn contour_projection(a: &Mat<f64>, center: f64, radius: f64, points: usize) -> Mat<f64> {
    use faer::c64;
    use faer::linalg::solvers::Solve;
    let n = a.nrows();
    let mut acc = Mat::<c64>::zeros(n, n);
    let id = Mat::<c64>::identity(n, n);
    for m in 0..points {
        let theta = 2.0 * std::f64::consts::PI * m as f64 / points as f64;
        let e = c64::new(theta.cos(), theta.sin());
        let z = c64::new(center, 0.0) + e * radius;
        let zm = Mat::from_fn(n, n, |i, j| if i == j { z } else { c64::new(0.0, 0.0) } - c64::new(a[(i, j)], 0.0));
        let r = zm.partial_piv_lu().solve(&id);
        let w = e * (radius / points as f64);
        acc += Mat::from_fn(n, n, |i, j| w * r[(i, j)]);
    }
    Mat::from_fn(n, n, |i, j| acc[(i, j)].re)
}

fn criterion_7() -> Outcome {
    let (mut alg, mut flow, mut oracle): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for beta in [0.0, 0.05] {
        let op = line_op(3.0, beta, 32)?;
        let w = ok(op.whitening())?;
        let (p0, p1) = ok(riesz_projections(&op))?;
        let (p0, p1) = (&p0.matrix, &p1.matrix);
        for p in [p0, p1] {
            alg = alg.max(ok(spectral_norm(&(p * p - p)))?);
        }
        alg = alg.max(ok(spectral_norm(&(p0 * p1)))?).max(ok(spectral_norm(&(p1 * p0)))?);
        for tau in [1.0f64, 5.0] {
            let e = expm(&scaled(&op.matrix, tau));
            flow = flow.max(ok(gram_norm(&w, &(&e * p0 - p0)))? / ok(gram_norm(&w, p0))?);
            let grown = scaled(p1, tau.exp());
            flow = flow.max(ok(gram_norm(&w, &(&e * p1 - &grown)))? / ok(gram_norm(&w, &grown))?);
        }
        for (center, p) in [(0.0, p0), (1.0, p1)] {
            let c = contour_projection(&op.matrix, center, 0.25, 32);
            oracle = oracle.max(ok(spectral_norm(&(&c - p)))? / ok(spectral_norm(p))?);
        }
    }
    ensure(alg < 1e-10, || format!("projection algebra defect {alg:e}"))?;
    ensure(flow < 1e-6, || format!("semigroup identity defect {flow:e}"))?;
    ensure(oracle < 1e-6, || format!("contour oracle mismatch {oracle:e}"))?;
    Ok(format!("algebra {alg:.1e}, semigroup {flow:.1e}, contour {oracle:.1e}"))
}

fn criterion_8() -> Outcome {
    let mut sups = Vec::new();
    for beta in [0.0, 0.03, 0.06] {
        let op = line_op(3.0, beta, 64)?;
        let (p0, p1) = ok(riesz_projections(&op))?;
        let q = complement(op.dim(), &[&p0.matrix, &p1.matrix]);
        let scan = ok(resolvent_scan(&op, &q, op.meta.params.default_omega0(), 50.0, 201))?;
        ensure(scan.sup.is_finite(), || format!("beta={beta}: unbounded resolvent"))?;
        sups.push(scan.sup);
    }
    let (lo, hi) = sups.iter().fold((f64::INFINITY, 0.0f64), |(a, b), s| (a.min(*s), b.max(*s)));
    ensure(hi / lo < 2.0, || format!("sup ratio {:.3} from {sups:?}", hi / lo))?;
    Ok(format!("sups {:.3} {:.3} {:.3}, ratio {:.3}", sups[0], sups[1], sups[2], hi / lo))
}

fn criterion_9() -> Outcome {
    let params = ok(ModelParams::new(1, 3.0, 2, 1.0))?;
    let cfg = EvolutionConfig::new(params, GridMode::Line, 32);
    let (mut par, mut field): (f64, f64) = (0.0, 0.0);
    for beta0 in [0.05, -0.05] {
        for t0 in [0.97, 1.03] {
            let data = Perturbation::ExactBoost { beta0: vec![beta0], t0 };
            let fit = ok(fit_parameters(&data, &cfg, &FitOptions::default()))?;
            let dp = (fit.beta_star[0] - beta0).abs().max((fit.t_star - t0).abs());
            ensure(dp < 1e-4, || format!("({beta0},{t0}): fitted ({}, {})", fit.beta_star[0], fit.t_star))?;
            par = par.max(dp);
            let exact = ok(Boost::new(vec![beta0], t0))?;
            for t in [0.3, 0.6, 0.9] {
                let slice = ok(reconstruct_physical(&fit.trajectory, &cfg, &fit.beta_star, fit.t_star, t))?;
                for (x, psi) in slice.x.iter().zip(&slice.psi) {
                    let e = (psi - ok(blowup_field(&params, &exact, t, &[*x]))?.0).abs();
                    ensure(e < 1e-8, || format!("({beta0},{t0}) t={t} x={x}: psi error {e:e}"))?;
                    field = field.max(e);
                }
            }
        }
    }
    Ok(format!("max parameter error {par:.1e}, max psi error {field:.1e}"))
}

fn generic_perturbations() -> Vec<(String, Perturbation)> {
    let mut out = vec![(
        "gaussian".to_string(),
        Perturbation::Gaussian { amplitude: 1e-3, width: 0.5, center: 0.1, velocity: 0.5 },
    )];
    for seed in 1..=3 {
        out.push((format!("polynomial seed {seed}"), Perturbation::polynomial(1e-3, 4, seed)));
    }
    out
}

fn criterion_10() -> Outcome {
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for p in [3.0, 5.0] {
        let params = ok(ModelParams::new(1, p, 2, 1.0))?;
        let target = params.omega_p;
        let mut cfg = EvolutionConfig::new(params, GridMode::Line, 32);
        cfg.tau_end = 8.0;
        for (name, data) in generic_perturbations() {
            let fit = ok(fit_parameters(&data, &cfg, &FitOptions::default()))?;
            let rate = ok(decay_rate(&fit.trajectory, (2.0, 8.0)))?;
            let table = ok(physical_seminorms(&fit.trajectory, &cfg, &fit.beta_star, fit.t_star, (0.5, 0.95), 20))?;
            let slopes: Vec<String> = table.slopes.iter().map(|s| format!("{s:.3}")).collect();
            lines.push(format!(
                "p={p} {name}: rate {rate:.4} (target {:.2}), seminorm slopes [{}]",
                -target,
                slopes.join(", ")
            ));
            if (rate + target).abs() > 0.2 {
                failures.push(format!("p={p} {name}: rate {rate:.4}"));
            }
            for (s, slope) in table.slopes.iter().enumerate() {
                if (slope - target).abs() > 0.15 {
                    failures.push(format!("p={p} {name}: s={s} slope {slope:.3}"));
                }
            }
        }
    }
    for l in &lines {
        println!("    {l}");
    }
    if failures.is_empty() {
        Ok(format!("{} runs", lines.len()))
    } else {
        Err(format!("{} of the checks missed: {}", failures.len(), failures.join("; ")))
    }
}

fn criterion_11() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in [3.0, 5.0] {
        let mut cfg = EvolutionConfig::new(ok(ModelParams::new(1, p, 2, 1.0))?, GridMode::Line, 32);
        cfg.tau_end = 10.0;
        let u0 = FieldPair::zeros(32);
        let traj = ok(selfsim::evolution::evolve(&u0, &[0.0], &cfg))?;
        ensure(traj.tau_samples.last().copied() == Some(10.0), || "run stopped early".into())?;
        worst = worst.max(traj.hk_norms.iter().copied().fold(0.0, f64::max));
        worst = worst.max(traj.states.iter().map(|s| sup(&s.to_stacked())).fold(0.0, f64::max));
    }
    ensure(worst <= 1e-12, || format!("max norm {worst:e}"))?;
    Ok(format!("max norm {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "commutator identity", Duration::from_secs(10), criterion_1),
        (2, "dissipativity certificates", Duration::from_secs(120), criterion_2),
        (3, "trace inequalities", Duration::from_secs(5), criterion_3),
        (4, "hypergeometric connection", Duration::from_secs(5), criterion_4),
        (5, "elliptic solver", Duration::from_secs(30), criterion_5),
        (6, "unstable spectrum", Duration::from_secs(120), criterion_6),
        (7, "projection algebra", Duration::from_secs(60), criterion_7),
        (8, "uniform resolvent scan", Duration::from_secs(120), criterion_8),
        (9, "exact-solution recovery", Duration::from_secs(300), criterion_9),
        (10, "decay-rate reproduction", Duration::from_secs(600), criterion_10),
        (11, "fixed-point triviality", Duration::from_secs(60), criterion_11),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed > limit {
                Err(format!("{msg}; runtime {elapsed:.1?} over the {limit:?} budget"))
            } else {
                Ok(msg)
            }
        });
        match outcome {
            Ok(msg) => println!("criterion {id:>2} PASS  {name}: {msg} [{elapsed:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {msg} [{elapsed:.2?}]");
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
