//! Simulation of the variance-optimal hedge under the physical measure.
//!
//! On a grid `t_k = k T / n` the discounted portfolio follows
//! `V_{k+1} = V_k + phi_k . (X_{k+1} - X_k)` with `X = B S`, `V_0 = C_0`, and
//! `phi_k = grad C(S_k, tau_{k-}) + G_k D(X_k)^{-1} rho(tau_{k-})` where
//! `G = B C - V`. Between events the asset moves by exact lognormal steps.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::auxfn::{AuxFunctions, GeneratorKind};
use crate::error::{Error, Result};
use crate::pricing::{
    FourierPricer, GridPricer, NestedMcPricer, OptionPricer, Payoff, DEFAULT_INNER_PAIRS,
};
use crate::rng::{self, DOMAIN_HEDGE};
use crate::simulate::{covariance_factor, log_drift, ChainSampler, Measure};
use crate::stats::{par_chunks, RunningStats};

/// Jumps per grid interval above which the grid counts as too coarse.
const COARSE_JUMPS: usize = 10;
/// Fraction of affected paths that triggers the coarse-grid warning.
const COARSE_FRACTION: f64 = 0.01;
/// Capital shift for the perturbed-capital comparison strategies.
pub const CAPITAL_SHIFT: f64 = 0.5;

/// How `C` and `grad C` are obtained inside the hedge loop.
#[derive(Debug, Clone, PartialEq)]
pub enum PricerChoice {
    /// Fourier for single-asset calls and puts, nested MC otherwise.
    Auto,
    Fourier { k_max: f64 },
    NestedMc { inner_pairs: usize },
    /// Interpolated table on `points` log-spaced spots covering
    /// `s0 exp(+- width_sd sigma_max sqrt(T))`.
    Grid { points: usize, width_sd: f64 },
}

impl PricerChoice {
    pub fn name(&self) -> &'static str {
        match self {
            PricerChoice::Auto => "auto",
            PricerChoice::Fourier { .. } => "fourier",
            PricerChoice::NestedMc { .. } => "nested-mc",
            PricerChoice::Grid { .. } => "grid",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HedgeConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub pricer: PricerChoice,
    pub seed: u64,
    /// Times for the martingale checks; `None` means `{0, T/4, T/2, 3T/4}`
    /// rounded down to the grid.
    pub checkpoints: Option<Vec<f64>>,
    /// `(U, V)` pairs for `E[G_T (X_V - X_U)] = 0`; `None` means
    /// `(T/4, 3T/4)` on the grid.
    pub increment_pairs: Option<Vec<(f64, f64)>>,
    /// Keep every grid record of every path.
    pub keep_paths: bool,
    /// Track the right-hand side of the hedging-error representation.
    pub decomposition: bool,
}

impl Default for HedgeConfig {
    fn default() -> Self {
        Self {
            n_steps: 100,
            n_paths: 10_000,
            pricer: PricerChoice::Auto,
            seed: 0,
            checkpoints: None,
            increment_pairs: None,
            keep_paths: false,
            decomposition: false,
        }
    }
}

/// State at one grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeRecord {
    pub step: usize,
    pub t: f64,
    pub s: Vec<f64>,
    /// Left-limit regime.
    pub regime: usize,
    pub discount: f64,
    pub price: f64,
    pub delta: Vec<f64>,
    /// Discounted portfolio value.
    pub value: f64,
    /// Position held over the next interval; zero at maturity.
    pub phi: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgePathResult {
    pub path: usize,
    /// Every grid record when paths are kept, otherwise only those needed by
    /// the diagnostics.
    pub records: Vec<HedgeRecord>,
    pub terminal_error: f64,
    /// Terminal errors of the comparison strategies, in
    /// [`ALTERNATIVE_NAMES`] order.
    pub alternative_errors: Vec<f64>,
    /// `(tracked G_k, reconstructed G_k)` per grid time.
    pub decomposition: Option<Vec<(f64, f64)>>,
    pub max_jumps_per_step: usize,
}

/// Comparison strategies: pure delta hedging from `C_0`, and the feedback
/// rule started from `C_0 + 0.5` and `C_0 - 0.5`.
pub const ALTERNATIVE_NAMES: [&str; 3] = ["delta_only", "capital_plus", "capital_minus"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub half_width: f64,
    pub n: u64,
}

impl Summary {
    fn from_stats(s: &RunningStats) -> Self {
        Self { mean: s.mean(), half_width: s.half_width(), n: s.count() }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.mean - x).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointStat {
    pub t: f64,
    /// `gamma_{tau_t}(T - t) G_t`
    pub gamma_g: Summary,
    /// `gamma_{tau_t}(T - t) X_t G_t`, per asset.
    pub gamma_x_g: Vec<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementStat {
    pub u: f64,
    pub v: f64,
    /// `G_T (X_V - X_U)`, per asset.
    pub stat: Vec<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleDiagnostics {
    pub checkpoints: Vec<CheckpointStat>,
    pub increments: Vec<IncrementStat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeStat {
    pub name: &'static str,
    /// Mean squared terminal error.
    pub he: f64,
    /// Mean of `G_alt^2 - G_opt^2` and its standard error.
    pub excess: f64,
    pub excess_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeStats {
    pub n_paths: usize,
    pub n_steps: usize,
    pub initial_price: f64,
    pub mean_g_t: f64,
    pub sd_g_t: f64,
    /// 95% half-width of the mean terminal error.
    pub ci: f64,
    pub mean_abs_g_t: f64,
    pub rms_he: f64,
    pub martingale: MartingaleDiagnostics,
    pub alternatives: Vec<AlternativeStat>,
    /// Share of paths with more than 10 regime jumps in some interval.
    pub coarse_fraction: f64,
    pub grid_too_coarse: bool,
}

#[derive(Debug, Clone)]
pub struct HedgeOutput {
    pub stats: HedgeStats,
    pub paths: Vec<HedgePathResult>,
}

fn grid_index(t: f64, horizon: f64, n: usize) -> Result<usize> {
    let x = t / horizon * n as f64;
    let k = x.round();
    if !(0.0..=n as f64).contains(&k) || (x - k).abs() > 1e-9 * n as f64 {
        return Err(Error::InvalidArgument(format!("time {t} is not on the hedging grid")));
    }
    Ok(k as usize)
}

fn build_pricer(
    aux: &AuxFunctions,
    payoff: &Payoff,
    s0: &[f64],
    horizon: f64,
    config: &HedgeConfig,
    grid: &[f64],
) -> Result<Arc<dyn OptionPricer>> {
    let d = aux.model().assets();
    let vanilla = d == 1 && matches!(payoff, Payoff::Call { .. } | Payoff::Put { .. });
    let horizons: Vec<f64> = grid.iter().map(|t| horizon - t).filter(|&h| h > 0.0).collect();
    let fourier = |k_max: f64| -> Result<Arc<dyn OptionPricer>> {
        let p = FourierPricer::new(aux, payoff, k_max)?;
        p.prepare(&horizons)?;
        Ok(Arc::new(p))
    };
    let nested = |n: usize| -> Result<Arc<dyn OptionPricer>> {
        Ok(Arc::new(NestedMcPricer::new(aux, payoff, n, config.seed)?))
    };
    match &config.pricer {
        PricerChoice::Auto if vanilla => fourier(4.0),
        PricerChoice::Auto => nested(DEFAULT_INNER_PAIRS),
        PricerChoice::Fourier { k_max } => fourier(*k_max),
        PricerChoice::NestedMc { inner_pairs } => nested(*inner_pairs),
        PricerChoice::Grid { points, width_sd } => {
            if d != 1 {
                return Err(Error::MultiAssetUnsupported(d));
            }
            let base = if vanilla { fourier(4.0)? } else { nested(DEFAULT_INNER_PAIRS)? };
            let sig = (0..aux.regimes()).map(|i| aux.model().cov(i)[(0, 0)].sqrt()).fold(0.0, f64::max);
            let w = width_sd * sig * horizon.sqrt();
            Ok(Arc::new(GridPricer::new(base, &horizons, aux.regimes(), s0[0] * (-w).exp(), s0[0] * w.exp(), *points)?))
        }
    }
}

struct Alternative {
    value: f64,
    feedback: bool,
}

/// Runs `config.n_paths` hedged paths and aggregates the diagnostics.
pub fn simulate_hedge(
    aux: &AuxFunctions,
    payoff: &Payoff,
    s0: &[f64],
    i0: usize,
    horizon: f64,
    config: &HedgeConfig,
) -> Result<HedgeOutput> {
    let model = aux.model();
    let d = model.assets();
    let l = model.regimes();
    let n = config.n_steps;
    if n == 0 || config.n_paths < 2 {
        return Err(Error::InvalidArgument("need at least 1 step and 2 paths".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("maturity must be positive".into()));
    }
    if s0.len() != d || s0.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument(format!("need {d} positive initial prices")));
    }
    if i0 >= l {
        return Err(Error::InvalidArgument(format!("regime {} outside 1..={l}", i0 + 1)));
    }
    payoff.check_assets(d)?;
    if !payoff.has_gradient() {
        return Err(Error::MissingGradient);
    }
    if config.decomposition && !(d == 1 && matches!(payoff, Payoff::Call { .. } | Payoff::Put { .. })) {
        return Err(Error::InvalidArgument("the error decomposition needs a single-asset call or put".into()));
    }
    let dt = horizon / n as f64;
    let grid: Vec<f64> = (0..=n).map(|k| if k == n { horizon } else { k as f64 * dt }).collect();

    let checkpoints: Vec<f64> = match &config.checkpoints {
        Some(c) => c.clone(),
        None => [0, n / 4, n / 2, 3 * n / 4].iter().map(|&k| grid[k]).collect(),
    };
    let pairs: Vec<(f64, f64)> = match &config.increment_pairs {
        Some(p) => p.clone(),
        None => vec![(grid[n / 4], grid[3 * n / 4])],
    };
    let mut keep = vec![config.keep_paths; n + 1];
    keep[0] = true;
    for &c in &checkpoints {
        keep[grid_index(c, horizon, n)?] = true;
    }
    for &(u, v) in &pairs {
        if u > v {
            return Err(Error::InvalidArgument(format!("increment pair ({u}, {v}) is reversed")));
        }
        keep[grid_index(u, horizon, n)?] = true;
        keep[grid_index(v, horizon, n)?] = true;
    }

    let pricer = build_pricer(aux, payoff, s0, horizon, config, &grid)?;
    let (c0, _) = pricer.value_and_gradient(horizon, s0, i0, (u64::MAX, 0))?;
    let chain = ChainSampler::new(aux, GeneratorKind::Constant, horizon)?;
    let drift: Vec<DVector<f64>> = (0..l).map(|i| log_drift(aux, Measure::Physical, i)).collect::<Result<_>>()?;
    let factors: Vec<DMatrix<f64>> = (0..l).map(|i| covariance_factor(model.cov(i))).collect::<Result<_>>()?;
    let tilde: Vec<DMatrix<f64>> = if config.decomposition {
        grid.iter().map(|t| aux.tilde_generator(horizon - t)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let ctx = PathContext {
        aux,
        payoff,
        pricer: pricer.as_ref(),
        chain: &chain,
        drift: &drift,
        factors: &factors,
        tilde: &tilde,
        grid: &grid,
        keep: &keep,
        s0,
        i0,
        c0,
        horizon,
        seed: config.seed,
        decomposition: config.decomposition,
    };

    let chunks = par_chunks(config.n_paths, |range| -> Result<Vec<HedgePathResult>> {
        range.map(|p| ctx.run(p)).collect()
    });
    let mut paths = Vec::with_capacity(config.n_paths);
    for c in chunks {
        paths.extend(c?);
    }

    let mut g = RunningStats::new();
    let mut abs_g = RunningStats::new();
    let mut sq = RunningStats::new();
    let mut excess = vec![RunningStats::new(); ALTERNATIVE_NAMES.len()];
    let mut alt_sq = vec![RunningStats::new(); ALTERNATIVE_NAMES.len()];
    let mut coarse = 0usize;
    for p in &paths {
        g.push(p.terminal_error);
        abs_g.push(p.terminal_error.abs());
        sq.push(p.terminal_error * p.terminal_error);
        for (a, &e) in p.alternative_errors.iter().enumerate() {
            excess[a].push(e * e - p.terminal_error * p.terminal_error);
            alt_sq[a].push(e * e);
        }
        if p.max_jumps_per_step > COARSE_JUMPS {
            coarse += 1;
        }
    }
    let coarse_fraction = coarse as f64 / paths.len() as f64;
    let grid_too_coarse = coarse_fraction > COARSE_FRACTION;
    if grid_too_coarse {
        log::warn!(
            "grid too coarse: {:.1}% of paths have more than {COARSE_JUMPS} regime jumps in one interval",
            100.0 * coarse_fraction
        );
    }
    let martingale = martingale_diagnostics(&paths, aux, horizon, &checkpoints, &pairs)?;
    let alternatives = ALTERNATIVE_NAMES
        .iter()
        .enumerate()
        .map(|(a, &name)| AlternativeStat {
            name,
            he: alt_sq[a].mean(),
            excess: excess[a].mean(),
            excess_se: excess[a].std_error(),
        })
        .collect();
    let stats = HedgeStats {
        n_paths: paths.len(),
        n_steps: n,
        initial_price: c0,
        mean_g_t: g.mean(),
        sd_g_t: g.sd(),
        ci: g.half_width(),
        mean_abs_g_t: abs_g.mean(),
        rms_he: sq.mean().sqrt(),
        martingale,
        alternatives,
        coarse_fraction,
        grid_too_coarse,
    };
    if !config.keep_paths && !config.decomposition {
        paths.clear();
    }
    Ok(HedgeOutput { stats, paths })
}

struct PathContext<'a> {
    aux: &'a AuxFunctions,
    payoff: &'a Payoff,
    pricer: &'a dyn OptionPricer,
    chain: &'a ChainSampler<'a>,
    drift: &'a [DVector<f64>],
    factors: &'a [DMatrix<f64>],
    tilde: &'a [DMatrix<f64>],
    grid: &'a [f64],
    keep: &'a [bool],
    s0: &'a [f64],
    i0: usize,
    c0: f64,
    horizon: f64,
    seed: u64,
    decomposition: bool,
}

impl PathContext<'_> {
    fn advance<R: Rng + ?Sized>(&self, log_s: &mut [f64], int_r: &mut f64, state: usize, dt: f64, rng: &mut R) {
        if dt <= 0.0 {
            return;
        }
        let d = log_s.len();
        let sq = dt.sqrt();
        let z: Vec<f64> = (0..d).map(|_| rng::std_normal(rng)).collect();
        let l = &self.factors[state];
        for j in 0..d {
            let mut shock = 0.0;
            for m in 0..=j {
                shock += l[(j, m)] * z[m];
            }
            log_s[j] += self.drift[state][j] * dt + shock * sq;
        }
        *int_r += self.aux.model().rate(state) * dt;
    }

    fn run(&self, path_id: usize) -> Result<HedgePathResult> {
        let model = self.aux.model();
        let d = model.assets();
        let l = model.regimes();
        let n = self.grid.len() - 1;
        let rho = &self.aux.risk().rho;
        let mut rng = rng::stream(self.seed, &[DOMAIN_HEDGE, self.i0 as u64], path_id as u64);
        let regime_path = self.chain.sample(self.i0, &mut rng)?;
        let jumps: Vec<(f64, usize)> = regime_path.jumps().map(|(t, _, to)| (t, to)).collect();

        let mut log_s: Vec<f64> = self.s0.iter().map(|s| s.ln()).collect();
        let mut int_r = 0.0;
        let mut state = self.i0;
        let mut next_jump = 0;
        let mut value = self.c0;
        let mut alts = [
            Alternative { value: self.c0, feedback: false },
            Alternative { value: self.c0 + CAPITAL_SHIFT, feedback: true },
            Alternative { value: self.c0 - CAPITAL_SHIFT, feedback: true },
        ];
        let mut records = Vec::new();
        let mut trace = self.decomposition.then(|| Vec::with_capacity(n + 1));
        let mut rebuilt = 0.0;
        let mut max_jumps = 0;
        // quantities carried from step k to k + 1
        let mut prev_x = vec![0.0; d];
        let mut prev_phi = vec![0.0; d];
        let mut prev_alt_phi = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
        let mut prev_error = 0.0;
        let mut prev_state = state;
        let mut prev_drift_term = 0.0;

        for k in 0..=n {
            let t = self.grid[k];
            if k > 0 {
                let mut now = self.grid[k - 1];
                let mut count = 0;
                while next_jump < jumps.len() && jumps[next_jump].0 < t {
                    let (tj, to) = jumps[next_jump];
                    self.advance(&mut log_s, &mut int_r, state, tj - now, &mut rng);
                    now = tj;
                    state = to;
                    next_jump += 1;
                    count += 1;
                }
                self.advance(&mut log_s, &mut int_r, state, t - now, &mut rng);
                max_jumps = max_jumps.max(count);
            }
            let s: Vec<f64> = log_s.iter().map(|x| x.exp()).collect();
            let discount = (-int_r).exp();
            let x: Vec<f64> = s.iter().map(|v| discount * v).collect();
            if k > 0 {
                for j in 0..d {
                    let dx = x[j] - prev_x[j];
                    value += prev_phi[j] * dx;
                    for (a, alt) in alts.iter_mut().enumerate() {
                        alt.value += prev_alt_phi[a][j] * dx;
                    }
                }
            }
            let h = self.horizon - t;
            let (price, delta) = if k == n {
                let mut g = vec![0.0; d];
                self.payoff.gradient(&s, &mut g)?;
                (self.payoff.value(&s), g)
            } else if k == 0 {
                let (_, g) = self.pricer.value_and_gradient(h, &s, state, (path_id as u64, 0))?;
                (self.c0, g)
            } else {
                self.pricer
                    .value_and_gradient(h, &s, state, (path_id as u64, k as u64))
                    .map_err(|e| match e {
                        Error::PricerFailure(_) => e,
                        other => Error::PricerFailure(other.to_string()),
                    })?
            };
            let error = if k == 0 { 0.0 } else { discount * price - value };
            let phi: Vec<f64> = if k == n {
                vec![0.0; d]
            } else {
                (0..d).map(|j| delta[j] + error * rho[state][j] / x[j]).collect()
            };
            for (a, alt) in alts.iter().enumerate() {
                let alt_error = discount * price - alt.value;
                for j in 0..d {
                    prev_alt_phi[a][j] = if k == n {
                        0.0
                    } else if alt.feedback {
                        delta[j] + alt_error * rho[state][j] / x[j]
                    } else {
                        delta[j]
                    };
                }
            }

            if let Some(trace) = trace.as_mut() {
                let all: Vec<f64> = if k == n {
                    vec![price; l]
                } else {
                    (0..l)
                        .map(|i| {
                            if i == state {
                                Ok(price)
                            } else {
                                self.pricer.value_and_gradient(h, &s, i, (path_id as u64, k as u64)).map(|r| r.0)
                            }
                        })
                        .collect::<Result<_>>()?
                };
                if k > 0 {
                    let dm: f64 = (0..d).map(|j| rho[prev_state][j] * (x[j] - prev_x[j]) / prev_x[j]).sum();
                    let jump = if state != prev_state { discount * (all[state] - all[prev_state]) } else { 0.0 };
                    rebuilt += -prev_error * dm + jump - prev_drift_term;
                }
                trace.push((error, rebuilt));
                if k < n {
                    let gen = &self.tilde[k];
                    let generated: f64 = (0..l).map(|j| gen[(state, j)] * all[j]).sum();
                    prev_drift_term = discount * generated * (self.grid[k + 1] - t);
                }
            }

            if self.keep[k] {
                records.push(HedgeRecord {
                    step: k,
                    t,
                    s: s.clone(),
                    regime: state,
                    discount,
                    price,
                    delta: delta.clone(),
                    value,
                    phi: phi.clone(),
                    error,
                });
            }
            prev_x = x;
            prev_phi = phi;
            prev_error = error;
            prev_state = state;
        }
        let terminal_error = prev_error;
        let discounted_payoff = (-int_r).exp() * self.payoff.value(&log_s.iter().map(|x| x.exp()).collect::<Vec<_>>());
        let alternative_errors = alts.iter().map(|a| discounted_payoff - a.value).collect();
        Ok(HedgePathResult {
            path: path_id,
            records,
            terminal_error,
            alternative_errors,
            decomposition: trace,
            max_jumps_per_step: max_jumps,
        })
    }
}

fn record_at(path: &HedgePathResult, t: f64, horizon: f64) -> Option<&HedgeRecord> {
    let tol = 1e-9 * horizon.max(1.0);
    path.records.iter().find(|r| (r.t - t).abs() <= tol)
}

/// Sample means and 95% half-widths of `gamma_{tau_t}(T-t) G_t` and
/// `gamma_{tau_t}(T-t) X_t G_t` at each checkpoint, and of `G_T (X_V - X_U)`
/// for each `(U, V)` pair. All should be consistent with zero.
pub fn martingale_diagnostics(
    paths: &[HedgePathResult],
    aux: &AuxFunctions,
    horizon: f64,
    checkpoints: &[f64],
    pairs: &[(f64, f64)],
) -> Result<MartingaleDiagnostics> {
    let d = aux.model().assets();
    let missing = |t: f64| Error::InvalidArgument(format!("no records retained at t = {t}"));
    let mut cps = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let gamma = aux.gamma((horizon - t).max(0.0))?;
        let mut g = RunningStats::new();
        let mut xg = vec![RunningStats::new(); d];
        for p in paths {
            let r = record_at(p, t, horizon).ok_or_else(|| missing(t))?;
            let w = gamma[r.regime] * r.error;
            g.push(w);
            for (acc, s) in xg.iter_mut().zip(&r.s) {
                acc.push(w * r.discount * s);
            }
        }
        cps.push(CheckpointStat {
            t,
            gamma_g: Summary::from_stats(&g),
            gamma_x_g: xg.iter().map(Summary::from_stats).collect(),
        });
    }
    let mut incs = Vec::with_capacity(pairs.len());
    for &(u, v) in pairs {
        let mut acc = vec![RunningStats::new(); d];
        for p in paths {
            let ru = record_at(p, u, horizon).ok_or_else(|| missing(u))?;
            let rv = record_at(p, v, horizon).ok_or_else(|| missing(v))?;
            for (a, (su, sv)) in acc.iter_mut().zip(ru.s.iter().zip(&rv.s)) {
                a.push(p.terminal_error * (rv.discount * sv - ru.discount * su));
            }
        }
        incs.push(IncrementStat { u, v, stat: acc.iter().map(Summary::from_stats).collect() });
    }
    Ok(MartingaleDiagnostics { checkpoints: cps, increments: incs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionReport {
    pub n_paths: usize,
    /// RMS over paths of the terminal discrepancy.
    pub rms_terminal: f64,
    /// RMS over paths and grid times.
    pub rms_path: f64,
    /// Largest absolute terminal discrepancy.
    pub max_terminal: f64,
}

/// Compares the tracked hedging error with its reconstruction from the
/// martingale, regime-jump and generator terms.
pub fn hedging_error_decomposition(paths: &[HedgePathResult]) -> Result<DecompositionReport> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no paths".into()));
    }
    let mut term = RunningStats::new();
    let mut all = RunningStats::new();
    let mut max_terminal = 0.0f64;
    for p in paths {
        let trace = p
            .decomposition
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("paths were simulated without the decomposition trace".into()))?;
        for &(g, r) in trace {
            all.push((g - r) * (g - r));
        }
        let &(g, r) = trace.last().expect("non-empty trace");
        term.push((g - r) * (g - r));
        max_terminal = max_terminal.max((g - r).abs());
    }
    Ok(DecompositionReport {
        n_paths: paths.len(),
        rms_terminal: term.mean().sqrt(),
        rms_path: all.mean().sqrt(),
        max_terminal,
    })
}
