//! Single-asset calls by inverting the characteristic functions of the
//! log-return under the forward and check laws.
//!
//! `P(X > k) = 1/2 + (1/pi) int_0^inf Im[e^{-iuk} phi(u)] / u du`, computed
//! with composite 16-point Gauss-Legendre panels. `|phi(u)|` is dominated by
//! `exp(-a_min h u^2 / 2)`, which fixes the truncation point with a rigorous
//! remainder bound.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Method, OptionPricer, Payoff, PriceEstimate};
use crate::auxfn::AuxFunctions;
use crate::error::{Error, Result};

const GL_ORDER: usize = 16;
/// Truncate where the envelope of the integrand drops below this.
const ENVELOPE_TOL: f64 = 1e-10;
/// Bound on the neglected tail of each probability.
const REMAINDER_TOL: f64 = 1e-9;
const MAX_NODES: usize = 1_000_000;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static CELL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Weighted characteristic-function samples for one time to maturity, every
/// starting regime, both laws.
#[derive(Debug, Clone)]
pub struct TailTable {
    horizon: f64,
    k_max: f64,
    nodes: Vec<f64>,
    /// Per regime and node: weighted `(re, im)` of `phi(u) / (iu)` under the
    /// forward law then the check law.
    coeffs: Vec<Vec<[f64; 4]>>,
    beta: Vec<f64>,
}

impl TailTable {
    /// Table accurate for log-moneyness `|log(K/s)| <= k_max`.
    pub fn new(aux: &AuxFunctions, horizon: f64, k_max: f64) -> Result<Self> {
        let model = aux.model();
        if model.assets() != 1 {
            return Err(Error::MultiAssetUnsupported(model.assets()));
        }
        if !(horizon >= 0.0) {
            return Err(Error::NegativeTime(horizon));
        }
        let l = model.regimes();
        let beta = aux.beta(horizon)?.iter().copied().collect();
        if horizon == 0.0 {
            return Ok(Self { horizon, k_max: f64::INFINITY, nodes: Vec::new(), coeffs: vec![Vec::new(); l], beta });
        }
        let vars: Vec<f64> = (0..l).map(|i| model.cov(i)[(0, 0)]).collect();
        let a_min = vars.iter().copied().fold(f64::INFINITY, f64::min);
        let a_max = vars.iter().copied().fold(0.0, f64::max);
        let drift = (0..l)
            .map(|i| model.rate(i).abs() + 0.5 * vars[i])
            .fold(0.0, f64::max);
        let c = a_min * horizon;
        let envelope = |u: f64| (-0.5 * c * u * u).exp() / u;
        let remainder = |u: f64| (-0.5 * c * u * u).exp() / (c * u * u);
        let mut upper = 1.0;
        while envelope(upper) > ENVELOPE_TOL || remainder(upper) > REMAINDER_TOL * PI {
            upper *= 1.25;
            if !upper.is_finite() || upper > 1e12 {
                return Err(Error::QuadratureNotConverged(format!("no truncation point for horizon {horizon:e}")));
            }
        }
        let k_max = k_max.abs();
        let width = (2.0 * PI / (k_max + drift * horizon + 1e-12))
            .min(2.0 / (a_max * horizon).sqrt())
            .min(upper);
        let panels = (upper / width).ceil() as usize;
        if panels * GL_ORDER > MAX_NODES {
            return Err(Error::QuadratureNotConverged(format!(
                "{} nodes needed for horizon {horizon:e} and |k| <= {k_max}",
                panels * GL_ORDER
            )));
        }
        let width = upper / panels as f64;
        let (gx, gw) = gl16();
        let delta = aux.delta(horizon)?;
        let gamma = aux.gamma(horizon)?;
        let per_panel: Vec<Vec<(f64, Vec<[f64; 4]>)>> = (0..panels)
            .into_par_iter()
            .map(|p| -> Result<Vec<(f64, Vec<[f64; 4]>)>> {
                let a = p as f64 * width;
                (0..GL_ORDER)
                    .map(|q| {
                        let u = a + 0.5 * width * (gx[q] + 1.0);
                        let w = 0.5 * width * gw[q];
                        let (fwd, chk) = aux.char_fns(horizon, Complex64::new(0.0, u), &delta, &gamma)?;
                        let row = (0..l)
                            .map(|i| {
                                // phi / (iu) = (im - i re) / u
                                [w * fwd[i].im / u, -w * fwd[i].re / u, w * chk[i].im / u, -w * chk[i].re / u]
                            })
                            .collect();
                        Ok((u, row))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut nodes = Vec::with_capacity(panels * GL_ORDER);
        let mut coeffs = vec![Vec::with_capacity(panels * GL_ORDER); l];
        for (u, row) in per_panel.into_iter().flatten() {
            nodes.push(u);
            for (i, v) in row.into_iter().enumerate() {
                coeffs[i].push(v);
            }
        }
        Ok(Self { horizon, k_max, nodes, coeffs, beta })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.beta[i]
    }

    /// `(P_forward(X > k), P_check(X > k))` for `X = log(S_T / s)`.
    pub fn tails(&self, i: usize, k: f64) -> (f64, f64) {
        if self.horizon == 0.0 {
            let p = if k < 0.0 { 1.0 } else { 0.0 };
            return (p, p);
        }
        let (mut f, mut c) = (0.0, 0.0);
        for (u, v) in self.nodes.iter().zip(&self.coeffs[i]) {
            let (sin, cos) = (u * k).sin_cos();
            f += cos * v[0] + sin * v[1];
            c += cos * v[2] + sin * v[3];
        }
        let clamp = |p: f64| p.clamp(0.0, 1.0);
        (clamp(0.5 + f / PI), clamp(0.5 + c / PI))
    }

    /// Call price and delta at spot `s`.
    pub fn call(&self, s: f64, strike: f64, i: usize) -> (f64, f64) {
        let (fwd, chk) = self.tails(i, (strike / s).ln());
        let mut price = s * chk - self.beta[i] * strike * fwd;
        if price < 0.0 {
            if price < -1e-8 {
                log::warn!("clipping negative call price {price:e} (s={s}, K={strike})");
            }
            price = 0.0;
        }
        (price, chk)
    }
}

fn check_inputs(aux: &AuxFunctions, strike: f64, s0: f64, i0: usize) -> Result<()> {
    let model = aux.model();
    if model.assets() != 1 {
        return Err(Error::MultiAssetUnsupported(model.assets()));
    }
    if !(strike > 0.0) || !(s0 > 0.0) {
        return Err(Error::InvalidArgument("strike and spot must be positive".into()));
    }
    if i0 >= model.regimes() {
        return Err(Error::InvalidArgument(format!("regime {} outside 1..={}", i0 + 1, model.regimes())));
    }
    Ok(())
}

/// `s P_check(S_T > K) - beta_i(T) K P_forward(S_T > K)`.
pub fn fourier_call(aux: &AuxFunctions, strike: f64, s0: f64, i0: usize, horizon: f64) -> Result<PriceEstimate> {
    check_inputs(aux, strike, s0, i0)?;
    let table = TailTable::new(aux, horizon, (strike / s0).ln())?;
    let (price, _) = table.call(s0, strike, i0);
    Ok(PriceEstimate {
        value: price,
        half_width: 0.0,
        n: table.len() as u64,
        method: Method::Fourier,
        measure: None,
        regime: Some(i0),
    })
}

/// `P_check(S_T > K)`.
pub fn fourier_call_delta(aux: &AuxFunctions, strike: f64, s0: f64, i0: usize, horizon: f64) -> Result<f64> {
    check_inputs(aux, strike, s0, i0)?;
    let table = TailTable::new(aux, horizon, (strike / s0).ln())?;
    Ok(table.tails(i0, (strike / s0).ln()).1)
}

/// Call or put pricer for the hedging loop. Tables are cached per time to
/// maturity.
#[derive(Debug)]
pub struct FourierPricer {
    aux: AuxFunctions,
    payoff: Payoff,
    k_max: f64,
    cache: RwLock<HashMap<u64, Arc<TailTable>>>,
}

impl FourierPricer {
    pub fn new(aux: &AuxFunctions, payoff: &Payoff, k_max: f64) -> Result<Self> {
        if aux.model().assets() != 1 {
            return Err(Error::MultiAssetUnsupported(aux.model().assets()));
        }
        match payoff {
            Payoff::Call { .. } | Payoff::Put { .. } => {}
            Payoff::Custom { .. } => {
                return Err(Error::InvalidArgument("Fourier pricing covers calls and puts only".into()))
            }
        }
        Ok(Self { aux: aux.clone(), payoff: payoff.clone(), k_max: k_max.abs(), cache: RwLock::new(HashMap::new()) })
    }

    /// Builds the tables for the given times to maturity up front.
    pub fn prepare(&self, horizons: &[f64]) -> Result<()> {
        let missing: Vec<f64> = {
            let cache = self.cache.read().expect("cache lock");
            horizons.iter().copied().filter(|h| !cache.contains_key(&h.to_bits())).collect()
        };
        let built = missing
            .par_iter()
            .map(|&h| TailTable::new(&self.aux, h, self.k_max).map(|t| (h.to_bits(), Arc::new(t))))
            .collect::<Result<Vec<_>>>()?;
        self.cache.write().expect("cache lock").extend(built);
        Ok(())
    }

    fn table(&self, horizon: f64) -> Result<Arc<TailTable>> {
        if let Some(t) = self.cache.read().expect("cache lock").get(&horizon.to_bits()) {
            return Ok(t.clone());
        }
        let t = Arc::new(TailTable::new(&self.aux, horizon, self.k_max)?);
        self.cache.write().expect("cache lock").insert(horizon.to_bits(), t.clone());
        Ok(t)
    }

    pub fn price(&self, horizon: f64, s: f64, regime: usize) -> Result<(f64, f64)> {
        let strike = self.payoff.strike().expect("vanilla payoff");
        let k = (strike / s).ln();
        let mut table = self.table(horizon)?;
        if k.abs() > table.k_max() {
            table = Arc::new(TailTable::new(&self.aux, horizon, k)?);
        }
        let (call, delta) = table.call(s, strike, regime);
        Ok(match self.payoff {
            Payoff::Put { .. } => ((call - s + table.beta(regime) * strike).max(0.0), delta - 1.0),
            _ => (call, delta),
        })
    }
}

impl OptionPricer for FourierPricer {
    fn value_and_gradient(&self, horizon: f64, s: &[f64], regime: usize, _key: (u64, u64)) -> Result<(f64, Vec<f64>)> {
        let (c, d) = self.price(horizon, s[0], regime)?;
        Ok((c, vec![d]))
    }
}
