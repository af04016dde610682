use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsgbm_core::pricing::FourierPricer;
use rsgbm_core::reference;
use rsgbm_core::{
    hedging_error_decomposition, simulate_hedge, AuxFunctions, HedgeConfig, Payoff, PricerChoice, RegimeModel,
};

fn shen() -> AuxFunctions {
    AuxFunctions::new(&reference::shen_model())
}

#[test]
fn fourier_prices_satisfy_the_pricing_pde() {
    let aux = shen();
    let pricer = FourierPricer::new(&aux, &Payoff::call(100.0), 4.0).unwrap();
    let model = aux.model();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let h = rng.random_range(0.1..0.9);
        let s = rng.random_range(70.0..140.0);
        let i = rng.random_range(0..2usize);
        let (dh, ds) = (1e-4, 1e-2 * s);
        let c = |h: f64, s: f64, j: usize| pricer.price(h, s, j).unwrap().0;
        let v = c(h, s, i);
        let c_t = -(c(h + dh, s, i) - c(h - dh, s, i)) / (2.0 * dh);
        let c_s = (c(h, s + ds, i) - c(h, s - ds, i)) / (2.0 * ds);
        let c_ss = (c(h, s + ds, i) - 2.0 * v + c(h, s - ds, i)) / (ds * ds);
        let gen = aux.tilde_generator(h).unwrap();
        let jump: f64 = (0..2).map(|j| gen[(i, j)] * c(h, s, j)).sum();
        let (r, a) = (model.rate(i), model.cov(i)[(0, 0)]);
        let terms = [c_t, r * s * c_s, 0.5 * a * s * s * c_ss, jump, -r * v];
        let residual: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|x| x.abs()).sum();
        assert!(residual.abs() <= 1e-3 * scale, "h={h} s={s} i={i}: residual {residual} scale {scale}");
    }
}

#[test]
fn optimal_strategy_beats_perturbations() {
    let cfg = HedgeConfig { n_steps: 100, n_paths: 10_000, seed: 3, ..Default::default() };
    let out = simulate_hedge(&shen(), &Payoff::call(100.0), &[100.0], 1, 1.0, &cfg).unwrap();
    let he = out.stats.rms_he.powi(2);
    for alt in &out.stats.alternatives {
        assert!(alt.excess >= -alt.excess_se, "{}: HE {} vs {he}", alt.name, alt.he);
    }
}

#[test]
fn decomposition_discrepancy_shrinks_with_step_size() {
    let aux = shen();
    let rms: Vec<f64> = [400, 800]
        .iter()
        .map(|&n_steps| {
            let cfg = HedgeConfig { n_steps, n_paths: 1_000, decomposition: true, seed: 5, ..Default::default() };
            let out = simulate_hedge(&aux, &Payoff::call(100.0), &[100.0], 0, 1.0, &cfg).unwrap();
            hedging_error_decomposition(&out.paths).unwrap().rms_terminal
        })
        .collect();
    assert!(rms[1] < rms[0], "{rms:?}");
}

#[test]
fn constant_regime_error_is_pure_discretisation() {
    let single = AuxFunctions::new(&RegimeModel::scalar(&[0.08], &[0.2], &[0.04], DMatrix::zeros(1, 1)).unwrap());
    let cfg = HedgeConfig { n_steps: 400, n_paths: 300, decomposition: true, ..Default::default() };
    let out = simulate_hedge(&single, &Payoff::call(100.0), &[100.0], 0, 1.0, &cfg).unwrap();
    let rep = hedging_error_decomposition(&out.paths).unwrap();
    assert!(out.stats.rms_he < 0.5, "{}", out.stats.rms_he);
    assert!(rep.rms_path < out.stats.rms_he, "{rep:?}");
}

#[test]
fn equal_regimes_discrepancy_halves_when_steps_quadruple() {
    // identical coefficients make regime jumps price-neutral, leaving only
    // the O(sqrt(dt)) gamma noise in the discrepancy
    let m = RegimeModel::scalar(
        &[0.06, 0.06],
        &[0.25, 0.25],
        &[0.03, 0.03],
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]),
    )
    .unwrap();
    let aux = AuxFunctions::new(&m);
    let rms: Vec<f64> = [50, 200]
        .iter()
        .map(|&n_steps| {
            let cfg = HedgeConfig { n_steps, n_paths: 1_000, decomposition: true, seed: 2, ..Default::default() };
            let out = simulate_hedge(&aux, &Payoff::call(100.0), &[100.0], 0, 1.0, &cfg).unwrap();
            hedging_error_decomposition(&out.paths).unwrap().rms_terminal
        })
        .collect();
    assert!(rms[1] < rms[0] / 1.5, "{rms:?}");
}

#[test]
fn put_hedge_and_grid_pricer() {
    let aux = shen();
    let base = HedgeConfig { n_steps: 50, n_paths: 2_000, seed: 9, ..Default::default() };
    let fourier = simulate_hedge(&aux, &Payoff::put(100.0), &[100.0], 0, 1.0, &base).unwrap();
    let grid_cfg = HedgeConfig { pricer: PricerChoice::Grid { points: 801, width_sd: 6.0 }, ..base.clone() };
    let grid = simulate_hedge(&aux, &Payoff::put(100.0), &[100.0], 0, 1.0, &grid_cfg).unwrap();
    assert!((fourier.stats.initial_price - grid.stats.initial_price).abs() < 1e-3);
    assert!((fourier.stats.rms_he - grid.stats.rms_he).abs() < 0.01 * fourier.stats.rms_he);
    assert!(fourier.stats.mean_g_t.abs() <= fourier.stats.ci);
}

#[test]
fn nested_monte_carlo_pricer_runs_in_the_loop() {
    let aux = shen();
    let cfg = HedgeConfig {
        n_steps: 5,
        n_paths: 40,
        pricer: PricerChoice::NestedMc { inner_pairs: 2_000 },
        keep_paths: true,
        ..Default::default()
    };
    let out = simulate_hedge(&aux, &Payoff::call(100.0), &[100.0], 0, 1.0, &cfg).unwrap();
    let exact = rsgbm_core::fourier_call(&aux, 100.0, 100.0, 0, 1.0).unwrap().value;
    assert!((out.stats.initial_price - exact).abs() < 0.5);
    assert_eq!(out.paths.len(), 40);
    assert!(out.paths.iter().all(|p| p.records.len() == 6 && p.terminal_error.is_finite()));
}
