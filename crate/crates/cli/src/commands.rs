//! One function per campaign. Each writes its CSVs and records contract outcomes.

use std::f64::consts::LN_2;
use std::io;

use rayon::prelude::*;
use selfsim::energy::{random_pairs, EnergyConfig, MarginProbe};
use selfsim::evolution::{
    build_initial_data, decay_rate, evolve, fit_parameters, physical_seminorms, EvolutionConfig, FitOptions,
    Perturbation, Trajectory,
};
use selfsim::hypergeom::{
    connection_residual, elliptic_solve, eval_poly, fundamental_system, mode_ode_coefficients, EllipticSolution,
    ModeSolveRequest, SolveData,
};
use selfsim::spectral::{
    assemble_l, complement, resolvent_scan, riesz_projections, unstable_eigs, Discretization, GridMode, SpectrumReport,
};

use crate::config::{Command, ConfigError, ExperimentConfig, PerturbationKind};
use crate::output::{fmt_f64, Artifacts};
use crate::plot;

/// Agreement tolerance for unstable eigenvalues.
const EIGEN_TOL: f64 = 1e-6;
/// Margins are certified up to this multiple of `||f||^2_{E^k}`.
const MARGIN_TOL: f64 = 1e-10;
const CONNECTION_TOL: f64 = 1e-10;
const WRONSKIAN_TOL: f64 = 1e-8;
const ELLIPTIC_TOL: f64 = 1e-8;
const LINE_CLOSED_FORM_TOL: f64 = 1e-12;
/// Closed-form family recovery in the fit.
const RECOVERY_TOL: f64 = 1e-4;
const RESOLVENT_LAMBDA_MAX: f64 = 50.0;
const RESOLVENT_POINTS: usize = 201;
const PHYSICAL_TIMES: usize = 20;

fn core<T>(r: selfsim::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

fn line_of(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

/// Command-specific preconditions beyond the per-key checks. `lines` maps a key to its line.
pub fn check_command(
    cfg: &ExperimentConfig,
    command: Command,
    lines: impl Fn(&str) -> usize,
) -> Result<(), ConfigError> {
    let d = cfg.params.d;
    match command {
        Command::Spectrum if d > 1 && !is_zero(&cfg.beta) => {
            Err(line_of(lines("beta"), "the mode-decomposed spectrum for d > 1 requires beta = 0"))
        }
        Command::Resolvent if d != 1 => Err(line_of(lines("d"), "the resolvent scan is available for d = 1 only")),
        Command::Evolve | Command::Fit if d > 1 && !is_zero(&cfg.beta) => {
            Err(line_of(lines("beta"), "radial evolution for d > 1 requires beta = 0"))
        }
        Command::Evolve | Command::Fit
            if d > 1 && cfg.perturbation.kind == PerturbationKind::ExactBoost && !is_zero(&cfg.perturbation.beta0) =>
        {
            Err(line_of(lines("beta0"), "radial evolution for d > 1 requires beta0 = 0"))
        }
        Command::Evolve | Command::Fit if cfg.tau_end < 1.0 => {
            Err(line_of(lines("tau_end"), "evolution campaigns need tau_end >= 1"))
        }
        _ => Ok(()),
    }
}

fn beta_cell(beta: &[f64]) -> String {
    beta.iter().map(|b| fmt_f64(*b)).collect::<Vec<_>>().join(";")
}

pub fn certify_energy(cfg: &ExperimentConfig, art: &mut Artifacts) -> io::Result<()> {
    let params = cfg.params;
    let k_max = params.k;
    let energy = match EnergyConfig::new(params, cfg.eps1) {
        Ok(e) => e,
        Err(e) => {
            art.check("energy configuration", Err(e.to_string()));
            return Ok(());
        }
    };
    let pairs = random_pairs(cfg.seed, params.d, 6, 6, cfg.pairs);
    let margins: Vec<Result<Vec<(f64, f64)>, String>> = pairs
        .par_iter()
        .map(|f| {
            let probe = core(MarginProbe::new(f, params.r, k_max))?;
            (1..=k_max).map(|k| core(probe.margin(&energy, k))).collect()
        })
        .collect();
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (i, m) in margins.into_iter().enumerate() {
        let m = match m {
            Ok(m) => m,
            Err(e) => {
                violations.push(format!("pair {i}: {e}"));
                continue;
            }
        };
        for (k, (margin, norm_sq)) in (1..=k_max).zip(m) {
            rows.push(vec![format!("pair{i:05}_k{k}"), fmt_f64(margin), fmt_f64(norm_sq.sqrt())]);
            worst = worst.max(margin / norm_sq);
            if !(margin <= MARGIN_TOL * norm_sq) {
                violations.push(format!("pair {i} k={k}: margin {margin:e}, norm^2 {norm_sq:e}"));
            }
        }
    }
    art.write_csv("margins.csv", &["config_id", "margin", "f_norm"], &rows)?;
    let outcome = if violations.is_empty() {
        Ok(format!("{} margins, max margin/norm^2 {worst:.3e}", rows.len()))
    } else {
        Err(format!("{} violations, first: {}", violations.len(), violations[0]))
    };
    art.check("dissipativity margins", outcome);
    Ok(())
}

/// 9-point central weights for the first and second derivative.
const D1: [f64; 9] = [1.0 / 280.0, -4.0 / 105.0, 0.2, -0.8, 0.0, 0.8, -0.2, 4.0 / 105.0, -1.0 / 280.0];
const D2: [f64; 9] = [-1.0 / 560.0, 8.0 / 315.0, -0.2, 1.6, -205.0 / 72.0, 1.6, -0.2, 8.0 / 315.0, -1.0 / 560.0];

fn fd_derivs(f: impl Fn(f64) -> selfsim::Result<f64>, x: f64, h: f64) -> selfsim::Result<(f64, f64, f64)> {
    let mut vals = [0.0; 9];
    for (i, v) in vals.iter_mut().enumerate() {
        *v = f(x + (i as f64 - 4.0) * h)?;
    }
    let dot = |w: &[f64; 9]| w.iter().zip(&vals).map(|(a, b)| a * b).sum::<f64>();
    Ok((vals[4], dot(&D1) / h, dot(&D2) / (h * h)))
}

/// Polynomial right-hand side used for every mode of the elliptic campaign.
const ELLIPTIC_DATA: [f64; 5] = [1.0, 0.5, -0.3, 0.2, 0.1];

pub fn elliptic(cfg: &ExperimentConfig, art: &mut Artifacts) -> io::Result<()> {
    let d = cfg.params.d;
    if d == 1 {
        let req = ModeSolveRequest { d: 1, k: cfg.params.k, r: cfg.params.r, data: SolveData::Line(vec![1.0]) };
        let sol = match elliptic_solve(&req) {
            Ok(EllipticSolution::Line(sol)) => sol,
            Ok(_) => unreachable!("a line request yields a line solution"),
            Err(e) => {
                art.check("line closed form", Err(e.to_string()));
                return Ok(());
            }
        };
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        for i in 0..=40 {
            let xi = -1.0 + 0.05 * i as f64;
            let f = sol.eval(xi);
            worst = worst.max((f + 4.0 / 3.0).abs());
            rows.push(vec![fmt_f64(xi), fmt_f64(f)]);
        }
        art.write_csv("elliptic_line.csv", &["xi", "f"], &rows)?;
        art.check(
            "line closed form",
            ensure(worst < LINE_CLOSED_FORM_TOL, || format!("deviation from -4/3 is {worst:e}"))
                .map(|_| format!("max deviation {worst:.1e}")),
        );
        return Ok(());
    }

    let z_grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let rhos = [0.1, 0.3, 0.5, 0.7, 0.9, 1.2, 1.6];
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let (mut worst_c, mut worst_w): (f64, f64) = (0.0, 0.0);
    for ell in 0..=cfg.l_max {
        let res = connection_residual(d, ell, &z_grid);
        let w = rhos.iter().try_fold(0.0f64, |m, &rho| {
            let v = fundamental_system(d, ell, rho)?;
            Ok::<f64, selfsim::Error>(m.max((v.wronskian_numeric() - v.wronskian).abs() / v.wronskian.abs()))
        });
        match (res, w) {
            (Ok(res), Ok(w)) => {
                rows.push(vec![d.to_string(), ell.to_string(), fmt_f64(res), fmt_f64(w)]);
                if !(res < CONNECTION_TOL && w < WRONSKIAN_TOL) {
                    failures.push(format!("l={ell}: residual {res:e}, Wronskian mismatch {w:e}"));
                }
                worst_c = worst_c.max(res);
                worst_w = worst_w.max(w);
            }
            (Err(e), _) | (_, Err(e)) => failures.push(format!("l={ell}: {e}")),
        }
    }
    art.write_csv("connection.csv", &["d", "ell", "connection_residual", "wronskian_mismatch"], &rows)?;
    art.check(
        "connection formula",
        if failures.is_empty() {
            Ok(format!("max residual {worst_c:.1e}, max Wronskian mismatch {worst_w:.1e}"))
        } else {
            Err(failures.join("; "))
        },
    );

    let r = cfg.params.r;
    let modes: Vec<(usize, Vec<f64>)> = (0..=cfg.l_max.min(3)).map(|l| (l, ELLIPTIC_DATA.to_vec())).collect();
    let req = ModeSolveRequest { d, k: cfg.params.k, r, data: SolveData::Modes(modes.clone()) };
    let sols = match elliptic_solve(&req) {
        Ok(EllipticSolution::Modes(s)) => s,
        Ok(_) => unreachable!("a mode request yields mode solutions"),
        Err(e) => {
            art.check("elliptic residual", Err(e.to_string()));
            return Ok(());
        }
    };
    // Sample points avoid the light cone, the origin and the solver's patch edges.
    let sample: Vec<f64> = [0.12, 0.2, 0.35, 0.56, 0.8, 0.93, 1.07, 1.4, 1.9].into_iter().filter(|x| *x < r).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (sol, (ell, data)) in sols.iter().zip(&modes) {
        for &rho in &sample {
            let h =
                (rho / 8.0).min(0.01).min((rho - 1.0).abs() / 6.0).min((rho - 0.5).abs() / 6.0).min((rho - 0.05) / 6.0);
            match fd_derivs(|x| sol.eval(x), rho, h) {
                Ok((f, f1, f2)) => {
                    let (a2, a1, a0) = mode_ode_coefficients(d, *ell, rho);
                    let res = (a2 * f2 + a1 * f1 + a0 * f - eval_poly(data, rho)).abs();
                    rows.push(vec![ell.to_string(), fmt_f64(rho), fmt_f64(f), fmt_f64(res)]);
                    worst = worst.max(res);
                    if !(res < ELLIPTIC_TOL) {
                        failures.push(format!("l={ell} rho={rho}: residual {res:e}"));
                    }
                }
                Err(e) => failures.push(format!("l={ell} rho={rho}: {e}")),
            }
        }
    }
    art.write_csv("elliptic_residual.csv", &["ell", "rho", "f", "residual"], &rows)?;
    art.check(
        "elliptic residual",
        if failures.is_empty() { Ok(format!("max residual {worst:.1e}")) } else { Err(failures.join("; ")) },
    );
    Ok(())
}

fn grid_modes(cfg: &ExperimentConfig) -> Vec<GridMode> {
    if cfg.params.d == 1 {
        vec![GridMode::Line]
    } else {
        (0..=cfg.l_max).map(GridMode::Radial).collect()
    }
}

fn expected_unstable(mode: GridMode) -> Vec<f64> {
    match mode {
        GridMode::Line => vec![0.0, 1.0],
        GridMode::Radial(0) => vec![1.0],
        GridMode::Radial(1) => vec![0.0],
        GridMode::Radial(_) => vec![],
    }
}

pub fn spectrum(cfg: &ExperimentConfig, art: &mut Artifacts) -> io::Result<()> {
    let params = cfg.params;
    let reports: Vec<(GridMode, Result<SpectrumReport, String>)> = grid_modes(cfg)
        .into_par_iter()
        .map(|mode| {
            let rep = Discretization::new(mode, cfg.n, params.r)
                .and_then(|disc| assemble_l(&params, &cfg.beta, &disc))
                .and_then(|op| unstable_eigs(&op, cfg.omega0));
            (mode, core(rep))
        })
        .collect();
    let fixed =
        [params.d.to_string(), fmt_f64(params.p), params.k.to_string(), fmt_f64(params.r), beta_cell(&cfg.beta)];
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut found = Vec::new();
    let mut failures = Vec::new();
    for (mode, rep) in &reports {
        let rep = match rep {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{mode}: {e}"));
                continue;
            }
        };
        for e in &rep.eigenvalues {
            let mut row = fixed.to_vec();
            row.extend([
                mode.to_string(),
                cfg.n.to_string(),
                fmt_f64(e.value.re),
                fmt_f64(e.value.im),
                e.resolved.to_string(),
            ]);
            rows.push(row);
            points.push((e.value.re, e.value.im, e.resolved));
        }
        let mut vals = rep.unstable_values();
        vals.sort_by(f64::total_cmp);
        let expected = expected_unstable(*mode);
        let matches =
            vals.len() == expected.len() && vals.iter().zip(&expected).all(|(a, b)| (a - b).abs() < EIGEN_TOL);
        if !matches {
            failures.push(format!("{mode}: unstable set {vals:?}, expected {expected:?}"));
        }
        found.extend(vals);
    }
    art.write_csv(
        "spectrum.csv",
        &["d", "p", "k", "R", "beta", "mode", "N", "re_lambda", "im_lambda", "resolved"],
        &rows,
    )?;
    if art.plots_enabled() {
        let title = format!("spectrum d={} p={} N={}", params.d, params.p, cfg.n);
        plot::spectrum(&art.path("spectrum.svg"), &title, cfg.omega0, &points).map_err(io::Error::other)?;
        art.register("spectrum.svg")?;
    }
    found.sort_by(f64::total_cmp);
    found.dedup_by(|a, b| (*a - *b).abs() < EIGEN_TOL);
    art.check(
        "unstable spectrum",
        if failures.is_empty() { Ok(format!("unstable set {found:?}")) } else { Err(failures.join("; ")) },
    );
    Ok(())
}

pub fn resolvent(cfg: &ExperimentConfig, art: &mut Artifacts) -> io::Result<()> {
    let scan = Discretization::new(GridMode::Line, cfg.n, cfg.params.r)
        .and_then(|disc| assemble_l(&cfg.params, &cfg.beta, &disc))
        .and_then(|op| {
            let (p0, p1) = riesz_projections(&op)?;
            let q = complement(op.dim(), &[&p0.matrix, &p1.matrix]);
            resolvent_scan(&op, &q, cfg.omega0, RESOLVENT_LAMBDA_MAX, RESOLVENT_POINTS)
        });
    let scan = match scan {
        Ok(s) => s,
        Err(e) => {
            art.check("resolvent bound", Err(e.to_string()));
            return Ok(());
        }
    };
    let rows: Vec<Vec<String>> = scan.rows.iter().map(|r| vec![fmt_f64(r.lambda), fmt_f64(r.norm)]).collect();
    art.write_csv("resolvent.csv", &["lambda", "norm"], &rows)?;
    if art.plots_enabled() {
        let pts = scan.rows.iter().map(|r| (r.lambda, r.norm)).collect();
        let title = format!("stable resolvent on Re z = {}", cfg.omega0);
        plot::log_curves(&art.path("resolvent.svg"), &title, "Im z", "norm", &[("norm".to_string(), pts)])
            .map_err(io::Error::other)?;
        art.register("resolvent.svg")?;
    }
    art.check(
        "resolvent bound",
        ensure(scan.sup.is_finite(), || "unbounded resolvent".into())
            .map(|_| format!("sup {:.6} at lambda {:.3}", scan.sup, scan.argsup)),
    );
    Ok(())
}

fn evolution_config(cfg: &ExperimentConfig) -> EvolutionConfig {
    let mode = if cfg.params.d == 1 { GridMode::Line } else { GridMode::Radial(0) };
    let mut ec = EvolutionConfig::new(cfg.params, mode, cfg.n);
    ec.tau_end = cfg.tau_end;
    ec.dt_factor = cfg.dt_factor;
    ec
}

fn perturbation(cfg: &ExperimentConfig) -> Perturbation {
    let p = &cfg.perturbation;
    match p.kind {
        PerturbationKind::Zero => Perturbation::Zero,
        PerturbationKind::Gaussian => {
            Perturbation::Gaussian { amplitude: p.amplitude, width: p.width, center: p.center, velocity: p.velocity }
        }
        PerturbationKind::Polynomial => Perturbation::polynomial(p.amplitude, p.degree, cfg.seed),
        PerturbationKind::ExactBoost => Perturbation::ExactBoost { beta0: p.beta0.clone(), t0: p.t0 },
    }
}

fn write_trajectory(traj: &Trajectory, nb: usize, art: &mut Artifacts) -> io::Result<()> {
    let mut header = vec!["tau".to_string(), "hk_norm".to_string(), "a1".to_string()];
    header.extend((1..=nb).map(|i| format!("a0_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = traj
        .tau_samples
        .iter()
        .zip(&traj.hk_norms)
        .zip(&traj.amplitudes)
        .map(|((t, n), a)| {
            let mut row = vec![fmt_f64(*t), fmt_f64(*n), fmt_f64(a.a1)];
            row.extend(a.a0.iter().map(|x| fmt_f64(*x)));
            row
        })
        .collect();
    art.write_csv("trajectory.csv", &header, &rows)?;
    let mut rows = Vec::new();
    for (t, semi) in traj.tau_samples.iter().zip(&traj.seminorms) {
        for (s, v) in semi.iter().enumerate() {
            rows.push(vec![fmt_f64(*t), s.to_string(), fmt_f64(*v)]);
        }
    }
    art.write_csv("seminorms.csv", &["tau", "s", "seminorm"], &rows)?;
    if art.plots_enabled() {
        let orders = traj.seminorms.first().map_or(0, Vec::len);
        let series: Vec<(String, Vec<(f64, f64)>)> = (0..orders)
            .map(|s| {
                (format!("s = {s}"), traj.tau_samples.iter().zip(&traj.seminorms).map(|(t, v)| (*t, v[s])).collect())
            })
            .collect();
        plot::log_curves(&art.path("trajectory.svg"), "seminorms along the flow", "tau", "||d^s u1||", &series)
            .map_err(io::Error::other)?;
        art.register("trajectory.svg")?;
    }
    Ok(())
}

fn decay_window(tau_end: f64) -> (f64, f64) {
    ((tau_end / 4.0).min(2.0), tau_end)
}

pub fn evolve_command(cfg: &ExperimentConfig, art: &mut Artifacts) -> io::Result<()> {
    let ec = evolution_config(cfg);
    let data = perturbation(cfg);
    let traj = ec
        .discretization()
        .and_then(|disc| build_initial_data(&ec, &disc, &data, &cfg.beta, cfg.t_blow))
        .and_then(|u0| evolve(&u0, &cfg.beta, &ec));
    let traj = match traj {
        Ok(t) => t,
        Err(e) => {
            art.check("evolution", Err(e.to_string()));
            return Ok(());
        }
    };
    write_trajectory(&traj, ec.boost_dim(), art)?;
    let last = traj.hk_norms.last().copied().unwrap_or(f64::NAN);
    // Early termination on norm growth is a diagnosed outcome, not a failure.
    let detail = match &traj.terminated {
        Some(why) => format!("stopped early: {why}"),
        None => format!("reached tau = {} with norm {last:.3e}", cfg.tau_end),
    };
    art.check("evolution", Ok(detail));
    Ok(())
}

pub fn fit_command(cfg: &ExperimentConfig, art: &mut Artifacts) -> io::Result<()> {
    let ec = evolution_config(cfg);
    let nb = ec.boost_dim();
    let data = perturbation(cfg);
    let opts = FitOptions { beta_init: cfg.beta[..nb].to_vec(), t_init: cfg.t_blow, ..FitOptions::default() };
    let fit = match fit_parameters(&data, &ec, &opts) {
        Ok(f) => f,
        Err(e) => {
            art.check("fit convergence", Err(e.to_string()));
            return Ok(());
        }
    };
    let rate = decay_rate(&fit.trajectory, decay_window(cfg.tau_end)).ok();
    let mut header = vec!["iter".to_string()];
    header.extend((1..=nb).map(|i| format!("beta_{i}")));
    header.extend(["T", "amp_norm", "decay_rate"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let last = fit.history.len().saturating_sub(1);
    let rows: Vec<Vec<String>> = fit
        .history
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut row = vec![h.iter.to_string()];
            row.extend(h.beta.iter().map(|b| fmt_f64(*b)));
            row.extend([fmt_f64(h.t_blow), fmt_f64(h.amp_norm)]);
            // The rate belongs to the converged trajectory only.
            row.push(if i == last { rate.map(fmt_f64).unwrap_or_default() } else { String::new() });
            row
        })
        .collect();
    art.write_csv("fit.csv", &header, &rows)?;
    write_trajectory(&fit.trajectory, nb, art)?;

    let t_star = fit.t_star;
    let tau_hi = (20.0f64).ln().min(0.99 * cfg.tau_end);
    let tau_lo = LN_2.min(0.5 * tau_hi);
    let t_of = |tau: f64| t_star * (1.0 - (-tau).exp());
    match physical_seminorms(&fit.trajectory, &ec, &fit.beta_star, t_star, (t_of(tau_lo), t_of(tau_hi)), PHYSICAL_TIMES)
    {
        Ok(table) => {
            let mut rows = Vec::new();
            for (t, row) in table.t.iter().zip(&table.rows) {
                for (s, v) in row.iter().enumerate() {
                    rows.push(vec![fmt_f64(*t), s.to_string(), fmt_f64(*v)]);
                }
            }
            art.write_csv("physical.csv", &["t", "s", "rescaled_seminorm"], &rows)?;
            let slopes: Vec<String> = table.slopes.iter().map(|s| format!("{s:.3}")).collect();
            art.log.push(format!("INFO physical seminorm slopes [{}]", slopes.join(", ")));
        }
        Err(e) => art.check("physical reconstruction", Err(e.to_string())),
    }

    let traj = &fit.trajectory;
    let first = traj.hk_norms.first().copied().unwrap_or(0.0);
    let last = traj.hk_norms.last().copied().unwrap_or(f64::NAN);
    // The unstable residue the fit tolerance admits, grown at rate 1 up to tau_end.
    let floor = opts.tol * cfg.tau_end.exp();
    art.check(
        "bounded trajectory",
        match &traj.terminated {
            Some(why) => Err(format!("fitted trajectory stopped early: {why}")),
            None => ensure(last <= first.max(floor), || format!("norm grew from {first:e} to {last:e}"))
                .map(|_| format!("norm {first:.3e} -> {last:.3e}")),
        },
    );

    let beta_text: Vec<String> = fit.beta_star.iter().map(|b| format!("{b:.10}")).collect();
    art.check(
        "fit convergence",
        Ok(format!(
            "beta* = [{}], T* = {:.10} after {} + {} iterations, residual {:.1e}",
            beta_text.join(", "),
            t_star,
            fit.presolve_iterations,
            fit.iterations,
            fit.final_amplitudes.norm()
        )),
    );
    match rate {
        Some(r) => art.log.push(format!("INFO decay rate {r:.4} (omega_p = {})", cfg.params.omega_p)),
        None => art.log.push("INFO decay rate unavailable for this trajectory".to_string()),
    }
    let p = &cfg.perturbation;
    if p.kind == PerturbationKind::ExactBoost {
        let err = fit.beta_star.iter().zip(&p.beta0).map(|(a, b)| (a - b).abs()).fold((t_star - p.t0).abs(), f64::max);
        art.check(
            "closed-form recovery",
            ensure(err < RECOVERY_TOL, || format!("parameter error {err:e}"))
                .map(|_| format!("parameter error {err:.1e}")),
        );
    }
    Ok(())
}
