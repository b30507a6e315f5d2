use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfsim::evolution::*;
use selfsim::model::{blowup_field, Boost, FieldPair, ModelParams, SymmetryMode};
use selfsim::spectral::{complement, riesz_projections, semigroup_decay, symmetry_vector, GridMode};

fn line_config(p: f64, n: usize) -> EvolutionConfig {
    EvolutionConfig::new(ModelParams::new(1, p, 2, 1.0).unwrap(), GridMode::Line, n)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn gaussian() -> Perturbation {
    Perturbation::Gaussian { amplitude: 1e-3, width: 0.5, center: 0.1, velocity: 0.5 }
}

/// Slope of `log y` against `log x`.
fn loglog(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    selfsim::spectral::log_slope(&lx, y).unwrap()
}

#[test]
fn zero_data_and_exact_cancellation() {
    let cfg = line_config(3.0, 32);
    let disc = cfg.discretization().unwrap();
    let u = build_initial_data(&cfg, &disc, &Perturbation::Zero, &[0.0], 1.0).unwrap();
    assert!(sup(&u.to_stacked()) == 0.0);
    for (b0, t0) in [(0.05, 1.03), (-0.05, 0.97), (0.1, 1.1)] {
        let data = Perturbation::ExactBoost { beta0: vec![b0], t0 };
        let u = build_initial_data(&cfg, &disc, &data, &[b0], t0).unwrap();
        assert!(sup(&u.to_stacked()) < 1e-10, "{b0} {t0}");
    }
    // Hyperplane through the slice.
    let data = Perturbation::ExactBoost { beta0: vec![0.5], t0: 0.4 };
    assert!(build_initial_data(&cfg, &disc, &data, &[0.0], 1.0).is_err());
}

#[test]
fn initial_data_remainder_is_quadratic() {
    let cfg = line_config(3.0, 24);
    let disc = cfg.discretization().unwrap();
    let ev = Evolver::new(&cfg, &[0.0]).unwrap();
    let f0 = symmetry_vector(&ev.op, SymmetryMode::Boost(0)).unwrap();
    let f1 = symmetry_vector(&ev.op, SymmetryMode::Time).unwrap();
    let eps = [1e-1, 3e-2, 1e-2, 3e-3];
    let rem: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let (beta, t) = (0.7 * e, 1.0 - 0.4 * e);
            let u = build_initial_data(&cfg, &disc, &Perturbation::Zero, &[beta], t).unwrap().to_stacked();
            let r: Vec<f64> = (0..u.len()).map(|i| u[i] - (t - 1.0) * f1[i] - beta * f0[i]).collect();
            ev.op.norm(&r)
        })
        .collect();
    let slope = loglog(&eps, &rem);
    assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
}

#[test]
fn rhs_examples() {
    let mut cfg = line_config(3.0, 32);
    let ev = Evolver::new(&cfg, &[0.03]).unwrap();
    let dim = ev.op.dim();
    let mut out = vec![1.0; dim];
    ev.rhs(&vec![0.0; dim], &mut out);
    assert!(out.iter().all(|v| *v == 0.0));

    let f1 = symmetry_vector(&ev.op, SymmetryMode::Time).unwrap();
    let eps = [1e-2, 1e-3, 1e-4];
    let defect: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let u: Vec<f64> = f1.iter().map(|v| e * v).collect();
            ev.rhs(&u, &mut out);
            sup(&diff(&out, &u))
        })
        .collect();
    let slope = loglog(&eps, &defect);
    assert!((slope - 2.0).abs() < 0.05, "slope {slope}");

    cfg.linearized = true;
    let lin = Evolver::new(&cfg, &[0.03]).unwrap();
    let f0 = symmetry_vector(&lin.op, SymmetryMode::Boost(0)).unwrap();
    lin.rhs(&f0, &mut out);
    assert!(sup(&out) < 1e-8 * sup(&f0));
}

#[test]
fn zero_is_a_fixed_point() {
    for p in [3.0, 5.0] {
        let mut cfg = line_config(p, 32);
        cfg.tau_end = 10.0;
        let traj = evolve(&FieldPair::zeros(32), &[0.0], &cfg).unwrap();
        assert!(traj.hk_norms.iter().all(|v| *v <= 1e-12));
        assert!(traj.terminated.is_none());
    }
}

#[test]
fn linearized_symmetry_modes() {
    let mut cfg = line_config(3.0, 32);
    cfg.linearized = true;
    cfg.tau_end = 5.0;
    let beta = [0.04];
    let ev = Evolver::new(&cfg, &beta).unwrap();
    let basis = unstable_basis(&ev.op).unwrap();
    let f0 = symmetry_vector(&ev.op, SymmetryMode::Boost(0)).unwrap();
    let f1 = symmetry_vector(&ev.op, SymmetryMode::Time).unwrap();
    let delta = 1e-3;

    let u0 = FieldPair::from_stacked(&f0.iter().map(|v| delta * v).collect::<Vec<_>>());
    let traj = evolve_with(&ev, &basis, &u0, &cfg).unwrap();
    let start = u0.to_stacked();
    for st in &traj.states {
        assert!(sup(&diff(&st.to_stacked(), &start)) < 1e-6 * sup(&start));
    }

    cfg.tau_end = 3.0;
    let u0 = FieldPair::from_stacked(&f1.iter().map(|v| delta * v).collect::<Vec<_>>());
    let traj = evolve_with(&ev, &basis, &u0, &cfg).unwrap();
    for (tau, norm) in traj.tau_samples.iter().zip(&traj.hk_norms) {
        let expected = traj.hk_norms[0] * tau.exp();
        assert!((norm - expected).abs() < 1e-3 * expected, "tau {tau}");
    }
}

#[test]
fn linearized_amplitudes_commute_with_flow() {
    let mut cfg = line_config(3.0, 32);
    cfg.linearized = true;
    cfg.tau_end = 4.0;
    let ev = Evolver::new(&cfg, &[0.03]).unwrap();
    let basis = unstable_basis(&ev.op).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs = &ev.op.disc.nodes;
    let mut u = FieldPair::zeros(32);
    for (i, x) in xs.iter().enumerate() {
        u.f1[i] = 1e-3 * (x + rng.random_range(-0.2..0.2) * x * x);
        u.f2[i] = 1e-3 * (1.0 - x * x * x);
    }
    let traj = evolve_with(&ev, &basis, &u, &cfg).unwrap();
    let a = &traj.amplitudes[0];
    for (tau, b) in traj.tau_samples.iter().zip(&traj.amplitudes) {
        assert!((b.a0[0] - a.a0[0]).abs() <= 1e-4 * a.a0[0].abs());
        let e = a.a1 * tau.exp();
        assert!((b.a1 - e).abs() <= 1e-4 * e.abs(), "tau {tau}");
    }
}

#[test]
fn time_step_halving() {
    let mut cfg = line_config(3.0, 24);
    cfg.tau_end = 2.0;
    let disc = cfg.discretization().unwrap();
    let u0 = build_initial_data(&cfg, &disc, &gaussian(), &[0.0], 1.0).unwrap();
    let coarse = evolve(&u0, &[0.0], &cfg).unwrap();
    cfg.dt_factor /= 2.0;
    let fine = evolve(&u0, &[0.0], &cfg).unwrap();
    let (a, b) = (coarse.hk_norms.last().unwrap(), fine.hk_norms.last().unwrap());
    assert!((a - b).abs() < 1e-6 * b, "{a} {b}");
}

#[test]
fn amplitude_dual_basis() {
    let cfg = line_config(3.0, 32);
    let ev = Evolver::new(&cfg, &[0.05]).unwrap();
    let basis = unstable_basis(&ev.op).unwrap();
    assert!(basis.gamma_condition < 1e8);
    let f0 = symmetry_vector(&ev.op, SymmetryMode::Boost(0)).unwrap();
    let f1 = symmetry_vector(&ev.op, SymmetryMode::Time).unwrap();
    let a = unstable_amplitudes(&basis, &f1);
    assert!(a.a0[0].abs() < 1e-8 && (a.a1 - 1.0).abs() < 1e-8);
    let mix: Vec<f64> = f0.iter().zip(&f1).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
    let a = unstable_amplitudes(&basis, &mix);
    assert!((a.a0[0] - 2.0).abs() < 1e-8 && (a.a1 + 3.0).abs() < 1e-8);

    let (p0, p1) = riesz_projections(&ev.op).unwrap();
    let q = complement(ev.op.dim(), &[&p0.matrix, &p1.matrix]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v: Vec<f64> = (0..ev.op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..v.len()).map(|i| (0..v.len()).map(|j| q[(i, j)] * v[j]).sum()).collect();
    assert!(unstable_amplitudes(&basis, &w).norm() < 1e-8);
}

#[test]
fn radial_basis_fits_time_only() {
    let params = ModelParams::new(3, 3.0, 2, 1.0).unwrap();
    let cfg = EvolutionConfig::new(params, GridMode::Radial(0), 24);
    assert_eq!(cfg.boost_dim(), 0);
    let ev = Evolver::new(&cfg, &[]).unwrap();
    let basis = unstable_basis(&ev.op).unwrap();
    let f1 = symmetry_vector(&ev.op, SymmetryMode::Time).unwrap();
    let a = unstable_amplitudes(&basis, &f1);
    assert!(a.a0.is_empty() && (a.a1 - 1.0).abs() < 1e-8);
    assert!(EvolutionConfig::new(params, GridMode::Radial(1), 24).validate().is_err());
}

#[test]
fn decay_rate_of_synthetic_data() {
    let taus: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
    let norms: Vec<f64> = taus.iter().map(|t| 3.0 * (-0.5 * t).exp()).collect();
    let r = decay_rate_of(&taus, &norms, (2.0, 8.0)).unwrap();
    assert!((r + 0.5).abs() < 1e-8);
    assert!(decay_rate_of(&taus, &norms, (2.0, 2.5)).is_err());
}

#[test]
fn stable_linearized_rate_matches_semigroup() {
    let mut cfg = line_config(3.0, 32);
    cfg.linearized = true;
    cfg.tau_end = 8.0;
    let ev = Evolver::new(&cfg, &[0.0]).unwrap();
    let basis = unstable_basis(&ev.op).unwrap();
    let (p0, p1) = riesz_projections(&ev.op).unwrap();
    let q = complement(ev.op.dim(), &[&p0.matrix, &p1.matrix]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nodes = &ev.op.disc.nodes;
    let v: Vec<f64> = (0..2 * nodes.len())
        .map(|i| 1e-3 * ((1.0 + nodes[i % nodes.len()]).powi(3) + rng.random_range(-0.1..0.1)))
        .collect();
    let w: Vec<f64> = (0..v.len()).map(|i| (0..v.len()).map(|j| q[(i, j)] * v[j]).sum()).collect();
    let traj = evolve_with(&ev, &basis, &FieldPair::from_stacked(&w), &cfg).unwrap();
    let rate = decay_rate(&traj, (2.0, 8.0)).unwrap();
    let taus: Vec<f64> = (0..=12).map(|i| 2.0 + 0.5 * i as f64).collect();
    let oracle = semigroup_decay(&ev.op, &q, &taus).unwrap();
    assert!((rate - oracle.rate).abs() < 0.05, "{rate} vs {}", oracle.rate);
}

#[test]
fn fit_recovers_exact_boost() {
    let cfg = line_config(3.0, 32);
    let data = Perturbation::ExactBoost { beta0: vec![0.05], t0: 1.03 };
    let fit = fit_parameters(&data, &cfg, &FitOptions::default()).unwrap();
    assert!((fit.beta_star[0] - 0.05).abs() < 1e-4 && (fit.t_star - 1.03).abs() < 1e-4);
    let boost = Boost::new(vec![0.05], 1.03).unwrap();
    for t in [0.3, 0.6, 0.9] {
        let slice = reconstruct_physical(&fit.trajectory, &cfg, &fit.beta_star, fit.t_star, t).unwrap();
        for (x, psi) in slice.x.iter().zip(&slice.psi) {
            let exact = blowup_field(&cfg.params, &boost, t, &[*x]).unwrap().0;
            assert!((psi - exact).abs() < 1e-8, "t {t} x {x}");
        }
    }
    // A different starting guess lands on the same parameters.
    let opts = FitOptions { beta_init: vec![0.02], t_init: 1.05, ..FitOptions::default() };
    let other = fit_parameters(&data, &cfg, &opts).unwrap();
    assert!((other.beta_star[0] - fit.beta_star[0]).abs() < 1e-4);
    assert!((other.t_star - fit.t_star).abs() < 1e-4);
}

#[test]
fn fit_of_zero_data_is_trivial() {
    let cfg = line_config(3.0, 24);
    let fit = fit_parameters(&Perturbation::Zero, &cfg, &FitOptions::default()).unwrap();
    assert_eq!(fit.iterations, 0);
    assert_eq!(fit.presolve_iterations, 0);
    assert_eq!((fit.beta_star[0], fit.t_star), (0.0, 1.0));
}

#[test]
fn fit_of_gaussian_bump() {
    let mut cfg = line_config(3.0, 32);
    cfg.tau_end = 8.0;
    let fit = fit_parameters(&gaussian(), &cfg, &FitOptions::default()).unwrap();
    assert!(fit.iterations <= 12);
    let rate = decay_rate(&fit.trajectory, (2.0, 8.0)).unwrap();
    assert!((-1.1..=-0.8).contains(&rate), "rate {rate}");
}

#[test]
fn fit_rejects_escaping_parameters() {
    let cfg = line_config(3.0, 24);
    let data = Perturbation::ExactBoost { beta0: vec![0.0], t0: 1.5 };
    let opts = FitOptions { delta: 0.1, ..FitOptions::default() };
    assert!(fit_parameters(&data, &cfg, &opts).is_err());
}

#[test]
fn reconstruction_round_trip_at_zero() {
    let cfg = line_config(3.0, 32);
    let disc = cfg.discretization().unwrap();
    let data = gaussian();
    let (beta, t_blow) = ([0.02], 1.01);
    let u0 = build_initial_data(&cfg, &disc, &data, &beta, t_blow).unwrap();
    let mut short = cfg.clone();
    short.tau_end = 0.2;
    let traj = evolve(&u0, &beta, &short).unwrap();
    let slice = reconstruct_physical(&traj, &cfg, &beta, t_blow, 0.0).unwrap();
    let base = Boost::unboosted(1);
    for (x, psi) in slice.x.iter().zip(&slice.psi) {
        let expected =
            blowup_field(&cfg.params, &base, 0.0, &[*x]).unwrap().0 + data.sample(&cfg.params, &[*x]).unwrap().0;
        assert!((psi - expected).abs() < 1e-12, "x {x}");
    }
    assert!(reconstruct_physical(&traj, &cfg, &beta, t_blow, t_blow).is_err());
}

#[test]
fn config_validation() {
    let mut cfg = line_config(3.0, 32);
    cfg.dt_factor = 4.5;
    assert!(cfg.validate().is_err());
    cfg.dt_factor = 2.0;
    cfg.tau_end = -1.0;
    assert!(cfg.validate().is_err());
    let params = ModelParams::new(3, 3.0, 2, 1.0).unwrap();
    assert!(EvolutionConfig::new(params, GridMode::Line, 32).validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn exact_boost_data_cancels(b0 in -0.3f64..0.3, t0 in 0.8f64..1.2) {
        let cfg = line_config(3.0, 16);
        let disc = cfg.discretization().unwrap();
        let data = Perturbation::ExactBoost { beta0: vec![b0], t0 };
        let u = build_initial_data(&cfg, &disc, &data, &[b0], t0).unwrap();
        prop_assert!(sup(&u.to_stacked()) < 1e-10);
    }

    #[test]
    fn amplitudes_are_linear(x in -2.0f64..2.0, y in -2.0f64..2.0, seed in 0u64..1000) {
        let cfg = line_config(3.0, 16);
        let ev = Evolver::new(&cfg, &[0.02]).unwrap();
        let basis = unstable_basis(&ev.op).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| x * a + y * b).collect();
        let (au, av, aw) = (unstable_amplitudes(&basis, &u), unstable_amplitudes(&basis, &v), unstable_amplitudes(&basis, &w));
        prop_assert!((aw.a1 - x * au.a1 - y * av.a1).abs() < 1e-9 * (1.0 + aw.a1.abs()));
        prop_assert!((aw.a0[0] - x * au.a0[0] - y * av.a0[0]).abs() < 1e-9 * (1.0 + aw.a0[0].abs()));
    }

    #[test]
    fn decay_rate_recovers_exponent(rate in -3.0f64..1.0, scale in 1e-6f64..1e3) {
        let taus: Vec<f64> = (0..=40).map(|i| 0.25 * i as f64).collect();
        let norms: Vec<f64> = taus.iter().map(|t| scale * (rate * t).exp()).collect();
        prop_assert!((decay_rate_of(&taus, &norms, (0.0, 10.0)).unwrap() - rate).abs() < 1e-9);
    }
}
