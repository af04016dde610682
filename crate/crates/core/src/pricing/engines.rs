use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;

use super::mc::mc_evaluate_with;
use super::{OptionPricer, Payoff};
use crate::auxfn::{AuxFunctions, UniformizationBound};
use crate::error::{Error, Result};
use crate::rng::DOMAIN_NESTED;
use crate::simulate::{ChainSampler, Measure, TerminalSampler};

pub const DEFAULT_INNER_PAIRS: usize = 20_000;

/// Inner Monte Carlo at every call, with its own stream per
/// `(seed, outer path, grid index)`.
#[derive(Debug)]
pub struct NestedMcPricer {
    aux: AuxFunctions,
    payoff: Payoff,
    inner_pairs: usize,
    seed: u64,
    bounds: RwLock<HashMap<u64, UniformizationBound>>,
}

impl NestedMcPricer {
    pub fn new(aux: &AuxFunctions, payoff: &Payoff, inner_pairs: usize, seed: u64) -> Result<Self> {
        if !payoff.has_gradient() {
            return Err(Error::MissingGradient);
        }
        payoff.check_assets(aux.model().assets())?;
        Ok(Self { aux: aux.clone(), payoff: payoff.clone(), inner_pairs, seed, bounds: RwLock::new(HashMap::new()) })
    }

    fn bound(&self, horizon: f64) -> Result<UniformizationBound> {
        if let Some(b) = self.bounds.read().expect("bound lock").get(&horizon.to_bits()) {
            return Ok(*b);
        }
        let b = self.aux.uniformization_bound(Measure::Forward.generator_kind(), horizon)?;
        self.bounds.write().expect("bound lock").insert(horizon.to_bits(), b);
        Ok(b)
    }
}

impl OptionPricer for NestedMcPricer {
    fn value_and_gradient(&self, horizon: f64, s: &[f64], regime: usize, key: (u64, u64)) -> Result<(f64, Vec<f64>)> {
        if horizon <= 0.0 {
            let mut g = vec![0.0; s.len()];
            self.payoff.gradient(s, &mut g)?;
            return Ok((self.payoff.value(s), g));
        }
        let chain = ChainSampler::with_bound(&self.aux, Measure::Forward.generator_kind(), horizon, self.bound(horizon)?)?;
        let sampler = TerminalSampler::with_chain(&self.aux, Measure::Forward, chain)?;
        let out = mc_evaluate_with(
            &sampler,
            &self.aux,
            std::slice::from_ref(&self.payoff),
            s,
            regime,
            self.inner_pairs,
            self.seed,
            &[DOMAIN_NESTED, key.0, key.1],
            true,
        )
        .map_err(|e| Error::PricerFailure(e.to_string()))?;
        Ok((out.values[0].value, out.deltas[0].iter().map(|d| d.value).collect()))
    }
}

struct Slice {
    /// value and `s dC/ds` per node, per regime
    nodes: Vec<Vec<(f64, f64)>>,
}

/// Single-asset pricer interpolating precomputed values on a log-spot grid
/// with cubic Hermite splines. Off-grid horizons and spots fall back to the
/// underlying pricer.
pub struct GridPricer {
    base: Arc<dyn OptionPricer>,
    x_lo: f64,
    x_hi: f64,
    points: usize,
    slices: HashMap<u64, Slice>,
}

impl std::fmt::Debug for GridPricer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridPricer")
            .field("x_lo", &self.x_lo)
            .field("x_hi", &self.x_hi)
            .field("points", &self.points)
            .field("horizons", &self.slices.len())
            .finish()
    }
}

impl GridPricer {
    pub fn new(
        base: Arc<dyn OptionPricer>,
        horizons: &[f64],
        regimes: usize,
        s_lo: f64,
        s_hi: f64,
        points: usize,
    ) -> Result<Self> {
        if !(s_lo > 0.0 && s_hi > s_lo) || points < 2 {
            return Err(Error::InvalidArgument("grid needs 0 < s_lo < s_hi and at least 2 points".into()));
        }
        let (x_lo, x_hi) = (s_lo.ln(), s_hi.ln());
        let step = (x_hi - x_lo) / (points - 1) as f64;
        let built = horizons
            .par_iter()
            .map(|&h| -> Result<(u64, Slice)> {
                let nodes = (0..regimes)
                    .map(|i| {
                        (0..points)
                            .map(|k| {
                                let s = (x_lo + step * k as f64).exp();
                                let (c, g) = base.value_and_gradient(h, &[s], i, (u64::MAX, k as u64))?;
                                Ok((c, s * g[0]))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((h.to_bits(), Slice { nodes }))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, x_lo, x_hi, points, slices: built.into_iter().collect() })
    }

    fn interpolate(&self, slice: &Slice, x: f64, regime: usize) -> (f64, f64) {
        let step = (self.x_hi - self.x_lo) / (self.points - 1) as f64;
        let pos = ((x - self.x_lo) / step).clamp(0.0, (self.points - 1) as f64);
        let k = (pos.floor() as usize).min(self.points - 2);
        let t = pos - k as f64;
        let (y0, m0) = slice.nodes[regime][k];
        let (y1, m1) = slice.nodes[regime][k + 1];
        let (m0, m1) = (m0 * step, m1 * step);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        let dvalue_dt = (6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1;
        (value, dvalue_dt / step)
    }
}

impl OptionPricer for GridPricer {
    fn value_and_gradient(&self, horizon: f64, s: &[f64], regime: usize, key: (u64, u64)) -> Result<(f64, Vec<f64>)> {
        let x = s[0].ln();
        match self.slices.get(&horizon.to_bits()) {
            Some(slice) if x >= self.x_lo && x <= self.x_hi => {
                let (c, dx) = self.interpolate(slice, x, regime);
                Ok((c, vec![dx / s[0]]))
            }
            _ => self.base.value_and_gradient(horizon, s, regime, key),
        }
    }
}
