//! Exact simulation of regime paths by uniformization and of terminal asset
//! values given the path.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::auxfn::{AuxFunctions, GeneratorKind, UniformizationBound};
use crate::error::{Error, Result};
use crate::rng::{open_uniform, std_normal};

/// Law under which paths are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Drift `mu`, generator `Lambda`.
    Physical,
    /// Log-drift `r - a_jj / 2`, generator `Lambda-arrow` at time-to-maturity.
    Forward,
    /// Single asset. Log-drift `r + a / 2`, generator `Lambda-tilde` at
    /// time-to-maturity.
    Check,
}

impl Measure {
    pub fn generator_kind(self) -> GeneratorKind {
        match self {
            Measure::Physical => GeneratorKind::Constant,
            Measure::Forward => GeneratorKind::Arrow,
            Measure::Check => GeneratorKind::Tilde,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Physical => "physical",
            Measure::Forward => "forward",
            Measure::Check => "check",
        }
    }
}

/// Piecewise-constant regime trajectory on `[0, horizon]`.
///
/// `times[0] = 0` and `states[k]` holds on `[times[k], times[k+1])`, the last
/// state up to `horizon`. Candidate times at which the chain stayed put are
/// kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegimePath {
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl RegimePath {
    pub fn constant(state: usize, horizon: f64) -> Self {
        Self { times: vec![0.0], states: vec![state], horizon }
    }

    pub fn initial_state(&self) -> usize {
        self.states[0]
    }

    pub fn final_state(&self) -> usize {
        *self.states.last().expect("path has an initial state")
    }

    /// Regime holding at time `t`, right-continuous.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        self.states[k.saturating_sub(1)]
    }

    /// `(time, from, to)` for actual regime changes.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        (1..self.states.len())
            .filter(move |&k| self.states[k] != self.states[k - 1])
            .map(move |k| (self.times[k], self.states[k - 1], self.states[k]))
    }

    /// Time spent in each regime.
    pub fn occupation(&self, regimes: usize) -> Vec<f64> {
        let mut occ = vec![0.0; regimes];
        for k in 0..self.states.len() {
            let end = self.times.get(k + 1).copied().unwrap_or(self.horizon);
            occ[self.states[k]] += end - self.times[k];
        }
        occ
    }

    fn reset(&mut self, state: usize, horizon: f64) {
        self.times.clear();
        self.states.clear();
        self.times.push(0.0);
        self.states.push(state);
        self.horizon = horizon;
    }
}

/// Uniformization sampler for one generator kind over a fixed horizon.
///
/// Time-dependent generators are evaluated at time-to-maturity
/// `horizon - u` for calendar time `u`.
#[derive(Debug, Clone)]
pub struct ChainSampler<'a> {
    aux: &'a AuxFunctions,
    kind: GeneratorKind,
    bound: UniformizationBound,
    horizon: f64,
    poisson: Option<Poisson<f64>>,
}

impl<'a> ChainSampler<'a> {
    pub fn new(aux: &'a AuxFunctions, kind: GeneratorKind, horizon: f64) -> Result<Self> {
        let bound = aux.uniformization_bound(kind, horizon)?;
        Self::with_bound(aux, kind, horizon, bound)
    }

    pub fn with_bound(
        aux: &'a AuxFunctions,
        kind: GeneratorKind,
        horizon: f64,
        bound: UniformizationBound,
    ) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(Error::NegativeTime(horizon));
        }
        if !(bound.lambda >= 0.0) || !bound.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("uniformization rate {}", bound.lambda)));
        }
        let mean = bound.lambda * horizon;
        let poisson = if mean > 0.0 {
            Some(Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?)
        } else {
            None
        };
        Ok(Self { aux, kind, bound, horizon, poisson })
    }

    pub fn bound(&self) -> &UniformizationBound {
        &self.bound
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sample<R: Rng + ?Sized>(&self, i0: usize, rng: &mut R) -> Result<RegimePath> {
        let mut path = RegimePath::default();
        self.sample_into(i0, rng, &mut path)?;
        Ok(path)
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, i0: usize, rng: &mut R, path: &mut RegimePath) -> Result<()> {
        let l = self.aux.regimes();
        if i0 >= l {
            return Err(Error::InvalidArgument(format!("regime {} outside 1..={l}", i0 + 1)));
        }
        path.reset(i0, self.horizon);
        let n = match &self.poisson {
            Some(p) => p.sample(rng) as usize,
            None => 0,
        };
        if n == 0 || l == 1 {
            return Ok(());
        }
        // n + 1 exponential spacings give the order statistics of n uniforms
        let mut cum = Vec::with_capacity(n + 1);
        let mut total = 0.0;
        for _ in 0..=n {
            let e: f64 = Exp1.sample(rng);
            total += e;
            cum.push(total);
        }
        let lambda = self.bound.lambda;
        let mut state = i0;
        let mut gen_const = None;
        for &c in &cum[..n] {
            let t = self.horizon * c / total;
            let gen = match self.kind {
                GeneratorKind::Constant => gen_const.get_or_insert_with(|| self.aux.model().generator().clone()).clone(),
                kind => self.aux.generator(kind, (self.horizon - t).max(0.0))?,
            };
            let exit = -gen[(state, state)];
            if exit > lambda {
                return Err(Error::BoundViolation { time: t, rate: exit, bound: lambda });
            }
            let v = open_uniform(rng) * lambda;
            let mut acc = 0.0;
            let mut next = state;
            for j in 0..l {
                if j == state {
                    continue;
                }
                acc += gen[(state, j)];
                if v < acc {
                    next = j;
                    break;
                }
            }
            state = next;
            path.times.push(t);
            path.states.push(state);
        }
        Ok(())
    }
}

/// Draws a regime path. Builds the uniformization bound on every call; use
/// [`ChainSampler`] for repeated draws.
pub fn sample_regime_path<R: Rng + ?Sized>(
    aux: &AuxFunctions,
    kind: GeneratorKind,
    bound: &UniformizationBound,
    i0: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<RegimePath> {
    ChainSampler::with_bound(aux, kind, horizon, *bound)?.sample(i0, rng)
}

/// Integrals of the regime-dependent coefficients along a path. All are exact
/// sums over the constant pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PathIntegrals {
    pub int_r: f64,
    pub int_ell: f64,
    /// Integrated log-drift, per asset.
    pub int_v: DVector<f64>,
    /// Integrated covariance.
    pub int_a: DMatrix<f64>,
}

/// Per-regime log-drift under a measure.
pub fn log_drift(aux: &AuxFunctions, measure: Measure, i: usize) -> Result<DVector<f64>> {
    let model = aux.model();
    let d = model.assets();
    let a = model.cov(i);
    match measure {
        Measure::Physical => Ok(DVector::from_fn(d, |j, _| model.mu(i)[j] - 0.5 * a[(j, j)])),
        Measure::Forward => Ok(DVector::from_fn(d, |j, _| model.rate(i) - 0.5 * a[(j, j)])),
        Measure::Check => {
            if d != 1 {
                return Err(Error::MultiAssetUnsupported(d));
            }
            Ok(DVector::from_element(1, model.rate(i) + 0.5 * a[(0, 0)]))
        }
    }
}

pub fn path_integrals(path: &RegimePath, aux: &AuxFunctions, measure: Measure) -> Result<PathIntegrals> {
    let model = aux.model();
    let l = model.regimes();
    let d = model.assets();
    let occ = path.occupation(l);
    let mut out = PathIntegrals {
        int_r: 0.0,
        int_ell: 0.0,
        int_v: DVector::zeros(d),
        int_a: DMatrix::zeros(d, d),
    };
    for (i, &w) in occ.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        out.int_r += w * model.rate(i);
        out.int_ell += w * aux.risk().ell[i];
        out.int_v += log_drift(aux, measure, i)? * w;
        out.int_a += model.cov(i) * w;
    }
    Ok(out)
}

/// Terminal asset values and the path integrals behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSample {
    pub s_t: DVector<f64>,
    pub integrals: PathIntegrals,
    pub antithetic: bool,
}

/// Lower factor `L` with `L L' = a`. Falls back to an eigenvalue-clipped
/// factor (clip at `1e-14 * trace`) when Cholesky fails.
pub fn covariance_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::CholeskyFailure("non-finite covariance".into()));
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.l());
    }
    let floor = 1e-14 * a.trace().max(0.0);
    let eig = a.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(floor).sqrt());
    log::debug!("covariance factor fell back to clipped eigen-decomposition");
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals))
}

/// Terminal sampler: uniformization for the regime path under the measure's
/// generator, then `log S_T = log s0 + int_v + L Z`.
#[derive(Debug, Clone)]
pub struct TerminalSampler<'a> {
    aux: &'a AuxFunctions,
    measure: Measure,
    chain: ChainSampler<'a>,
    drift: Vec<DVector<f64>>,
}

impl<'a> TerminalSampler<'a> {
    pub fn new(aux: &'a AuxFunctions, measure: Measure, horizon: f64) -> Result<Self> {
        let chain = ChainSampler::new(aux, measure.generator_kind(), horizon)?;
        Self::with_chain(aux, measure, chain)
    }

    pub fn with_chain(aux: &'a AuxFunctions, measure: Measure, chain: ChainSampler<'a>) -> Result<Self> {
        let drift = (0..aux.regimes())
            .map(|i| log_drift(aux, measure, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { aux, measure, chain, drift })
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn chain(&self) -> &ChainSampler<'a> {
        &self.chain
    }

    /// Draws one path and returns the terminal value and, if requested, the
    /// partner built from the same path with the Gaussian draw negated.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        s0: &DVector<f64>,
        i0: usize,
        rng: &mut R,
        antithetic: bool,
    ) -> Result<(TerminalSample, Option<TerminalSample>)> {
        let d = self.aux.model().assets();
        if s0.len() != d {
            return Err(Error::DimensionMismatch(format!("s0 has {} entries, model has {d} assets", s0.len())));
        }
        if s0.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument("initial prices must be positive".into()));
        }
        let path = self.chain.sample(i0, rng)?;
        let integrals = path_integrals(&path, self.aux, self.measure)?;
        let z = DVector::from_fn(d, |_, _| std_normal(rng));
        let factor = covariance_factor(&integrals.int_a)?;
        let shock = &factor * &z;
        let build = |sign: f64, anti: bool| TerminalSample {
            s_t: DVector::from_fn(d, |j, _| s0[j] * (integrals.int_v[j] + sign * shock[j]).exp()),
            integrals: integrals.clone(),
            antithetic: anti,
        };
        let first = build(1.0, false);
        let second = antithetic.then(|| build(-1.0, true));
        Ok((first, second))
    }

    /// Fast path for a single asset: returns the occupation-weighted log-mean
    /// and variance of `log(S_T / s0)` for one regime path.
    pub(crate) fn sample_scalar_moments<R: Rng + ?Sized>(
        &self,
        i0: usize,
        rng: &mut R,
        path: &mut RegimePath,
        occ: &mut [f64],
    ) -> Result<(f64, f64)> {
        self.chain.sample_into(i0, rng, path)?;
        occ.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..path.states.len() {
            let end = path.times.get(k + 1).copied().unwrap_or(path.horizon);
            occ[path.states[k]] += end - path.times[k];
        }
        let model = self.aux.model();
        let mut mean = 0.0;
        let mut var = 0.0;
        for (i, &w) in occ.iter().enumerate() {
            mean += w * self.drift[i][0];
            var += w * model.cov(i)[(0, 0)];
        }
        Ok((mean, var))
    }
}

/// One terminal draw (plus optional antithetic partner). Builds the
/// uniformization bound on every call.
#[allow(clippy::too_many_arguments)]
pub fn sample_terminal<R: Rng + ?Sized>(
    aux: &AuxFunctions,
    measure: Measure,
    s0: &DVector<f64>,
    i0: usize,
    horizon: f64,
    rng: &mut R,
    antithetic: bool,
) -> Result<(TerminalSample, Option<TerminalSample>)> {
    TerminalSampler::new(aux, measure, horizon)?.sample(s0, i0, rng, antithetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RegimeModel;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn shen_aux() -> AuxFunctions {
        AuxFunctions::new(
            &RegimeModel::scalar(
                &[0.04, 0.08],
                &[0.4, 0.2],
                &[0.02, 0.04],
                DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]),
            )
            .unwrap(),
        )
    }

    #[test]
    fn single_regime_path_is_constant() {
        let m = RegimeModel::scalar(&[0.05], &[0.2], &[0.02], DMatrix::zeros(1, 1)).unwrap();
        let aux = AuxFunctions::new(&m);
        let bound = UniformizationBound { lambda: 5.0, sup_rate: 0.0, grid_points: 2, kind: GeneratorKind::Constant, horizon: 1.0 };
        let mut r = rng::stream(0, &[], 0);
        for _ in 0..50 {
            let p = sample_regime_path(&aux, GeneratorKind::Constant, &bound, 0, 1.0, &mut r).unwrap();
            assert!(p.states.iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn path_times_are_ordered_and_bounded() {
        let aux = shen_aux();
        let s = ChainSampler::new(&aux, GeneratorKind::Arrow, 3.0).unwrap();
        let mut r = rng::stream(3, &[], 0);
        for _ in 0..500 {
            let p = s.sample(1, &mut r).unwrap();
            assert_eq!(p.times[0], 0.0);
            assert_eq!(p.initial_state(), 1);
            assert!(p.times.windows(2).all(|w| w[0] < w[1]));
            assert!(*p.times.last().unwrap() < 3.0);
            assert!(p.states.iter().all(|&x| x < 2));
        }
    }

    #[test]
    fn undersized_bound_is_reported() {
        let aux = shen_aux();
        let bound = UniformizationBound { lambda: 0.3, sup_rate: 0.3, grid_points: 2, kind: GeneratorKind::Constant, horizon: 50.0 };
        let mut r = rng::stream(0, &[], 0);
        let err = sample_regime_path(&aux, GeneratorKind::Constant, &bound, 0, 50.0, &mut r).unwrap_err();
        assert!(matches!(err, Error::BoundViolation { .. }));
    }

    #[test]
    fn integrals_over_simple_paths() {
        let aux = shen_aux();
        let p = RegimePath::constant(1, 2.0);
        let pi = path_integrals(&p, &aux, Measure::Forward).unwrap();
        assert_abs_diff_eq!(pi.int_r, 0.08, epsilon = 1e-15);
        assert_abs_diff_eq!(pi.int_a[(0, 0)], 0.08, epsilon = 1e-15);
        let w = 0.3;
        let p2 = RegimePath { times: vec![0.0, w], states: vec![0, 1], horizon: 1.0 };
        let pi2 = path_integrals(&p2, &aux, Measure::Physical).unwrap();
        assert_abs_diff_eq!(pi2.int_r, w * 0.02 + (1.0 - w) * 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(pi2.int_ell, w * 0.0025 + (1.0 - w) * 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(pi2.int_v[0], w * (0.04 - 0.08) + (1.0 - w) * (0.08 - 0.02), epsilon = 1e-15);
        let pc = path_integrals(&p2, &aux, Measure::Check).unwrap();
        assert_abs_diff_eq!(pc.int_v[0], w * 0.1 + (1.0 - w) * 0.06, epsilon = 1e-15);
        assert_eq!(p2.state_at(0.0), 0);
        assert_eq!(p2.state_at(w), 1);
        assert_eq!(p2.jumps().collect::<Vec<_>>(), vec![(w, 0, 1)]);
    }

    #[test]
    fn clipped_factor_for_singular_covariance() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = covariance_factor(&a).unwrap();
        assert!((&l * l.transpose() - &a).abs().max() < 1e-7);
        let z = covariance_factor(&DMatrix::zeros(2, 2)).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn antithetic_partner_shares_path() {
        let aux = shen_aux();
        let sampler = TerminalSampler::new(&aux, Measure::Forward, 1.0).unwrap();
        let mut r = rng::stream(5, &[], 0);
        let s0 = DVector::from_element(1, 100.0);
        for _ in 0..100 {
            let (a, b) = sampler.sample(&s0, 0, &mut r, true).unwrap();
            let b = b.unwrap();
            assert_eq!(a.integrals, b.integrals);
            // geometric mean of the pair is the zero-shock value
            let mid = 100.0 * a.integrals.int_v[0].exp();
            assert_abs_diff_eq!((a.s_t[0] * b.s_t[0]).sqrt(), mid, epsilon = 1e-9);
        }
    }
}
