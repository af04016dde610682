use nalgebra::DVector;

use super::{Method, Payoff, PriceEstimate};
use crate::auxfn::AuxFunctions;
use crate::error::{Error, Result};
use crate::rng::{self, DOMAIN_PRICE};
use crate::simulate::{Measure, RegimePath, TerminalSampler};
use crate::stats::{par_chunks, RunningStats, Z95};

/// Values and (optionally) pathwise deltas for several payoffs sharing the
/// same forward-measure sample.
#[derive(Debug, Clone)]
pub struct McOutput {
    pub values: Vec<PriceEstimate>,
    /// `deltas[p][j]`: derivative of payoff `p`'s price in asset `j`.
    pub deltas: Vec<Vec<PriceEstimate>>,
}

/// Forward-measure Monte Carlo with antithetic pairs; each pair is one
/// observation. Streams are keyed by `(seed, regime)` and the pair index.
#[allow(clippy::too_many_arguments)]
pub fn mc_evaluate(
    aux: &AuxFunctions,
    payoffs: &[Payoff],
    s0: &[f64],
    i0: usize,
    horizon: f64,
    n_pairs: usize,
    seed: u64,
    with_delta: bool,
) -> Result<McOutput> {
    let sampler = TerminalSampler::new(aux, Measure::Forward, horizon)?;
    mc_evaluate_with(&sampler, aux, payoffs, s0, i0, n_pairs, seed, &[DOMAIN_PRICE, i0 as u64], with_delta)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn mc_evaluate_with(
    sampler: &TerminalSampler<'_>,
    aux: &AuxFunctions,
    payoffs: &[Payoff],
    s0: &[f64],
    i0: usize,
    n_pairs: usize,
    seed: u64,
    keys: &[u64],
    with_delta: bool,
) -> Result<McOutput> {
    let model = aux.model();
    let d = model.assets();
    if n_pairs < 2 {
        return Err(Error::InvalidArgument("at least 2 antithetic pairs are needed".into()));
    }
    if i0 >= model.regimes() {
        return Err(Error::InvalidArgument(format!("regime {} outside 1..={}", i0 + 1, model.regimes())));
    }
    if s0.len() != d {
        return Err(Error::DimensionMismatch(format!("s0 has {} entries, model has {d} assets", s0.len())));
    }
    if s0.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("initial prices must be positive".into()));
    }
    for p in payoffs {
        p.check_assets(d)?;
        if with_delta && !p.has_gradient() {
            return Err(Error::MissingGradient);
        }
    }
    let np = payoffs.len();
    let width = if with_delta { 1 + d } else { 1 };
    let s0_vec = DVector::from_column_slice(s0);

    let chunks = par_chunks(n_pairs, |range| -> Result<Vec<RunningStats>> {
        let mut acc = vec![RunningStats::new(); np * width];
        let mut path = RegimePath::default();
        let mut occ = vec![0.0; model.regimes()];
        let mut up = vec![0.0; d];
        let mut down = vec![0.0; d];
        let mut g_up = vec![0.0; d];
        let mut g_down = vec![0.0; d];
        for idx in range {
            let mut r = rng::stream(seed, keys, idx as u64);
            if d == 1 {
                let (m, v) = sampler.sample_scalar_moments(i0, &mut r, &mut path, &mut occ)?;
                let z = rng::std_normal(&mut r);
                let shock = v.sqrt() * z;
                up[0] = s0[0] * (m + shock).exp();
                down[0] = s0[0] * (m - shock).exp();
            } else {
                let (a, b) = sampler.sample(&s0_vec, i0, &mut r, true)?;
                let b = b.expect("antithetic partner requested");
                up.copy_from_slice(a.s_t.as_slice());
                down.copy_from_slice(b.s_t.as_slice());
            }
            for (p, payoff) in payoffs.iter().enumerate() {
                let base = p * width;
                acc[base].push(0.5 * (payoff.value(&up) + payoff.value(&down)));
                if with_delta {
                    payoff.gradient(&up, &mut g_up)?;
                    payoff.gradient(&down, &mut g_down)?;
                    for j in 0..d {
                        let x = 0.5 * (up[j] * g_up[j] + down[j] * g_down[j]) / s0[j];
                        acc[base + 1 + j].push(x);
                    }
                }
            }
        }
        Ok(acc)
    });

    let mut total = vec![RunningStats::new(); np * width];
    for chunk in chunks {
        for (t, c) in total.iter_mut().zip(chunk?.iter()) {
            t.merge(c);
        }
    }
    let beta = aux.beta(sampler.chain().horizon())?[i0];
    let estimate = |s: &RunningStats| PriceEstimate {
        value: beta * s.mean(),
        half_width: beta * Z95 * s.std_error(),
        n: s.count(),
        method: Method::MonteCarlo,
        measure: Some(Measure::Forward),
        regime: Some(i0),
    };
    let values = (0..np).map(|p| estimate(&total[p * width])).collect();
    let deltas = if with_delta {
        (0..np)
            .map(|p| (0..d).map(|j| estimate(&total[p * width + 1 + j])).collect())
            .collect()
    } else {
        vec![Vec::new(); np]
    };
    Ok(McOutput { values, deltas })
}

/// `beta_i(T) E[payoff(S_T)]` under the forward law.
#[allow(clippy::too_many_arguments)]
pub fn mc_price(
    aux: &AuxFunctions,
    payoff: &Payoff,
    s0: &[f64],
    i0: usize,
    horizon: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<PriceEstimate> {
    let out = mc_evaluate(aux, std::slice::from_ref(payoff), s0, i0, horizon, n_pairs, seed, false)?;
    Ok(out.values[0])
}

/// Pathwise delta per asset, `beta_i(T) E[S_T^j d_j payoff(S_T)] / s0^j`.
#[allow(clippy::too_many_arguments)]
pub fn mc_delta(
    aux: &AuxFunctions,
    payoff: &Payoff,
    s0: &[f64],
    i0: usize,
    horizon: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<PriceEstimate>> {
    let out = mc_evaluate(aux, std::slice::from_ref(payoff), s0, i0, horizon, n_pairs, seed, true)?;
    Ok(out.deltas.into_iter().next().unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RegimeModel;
    use crate::pricing::{bs_price, OptionKind};
    use nalgebra::DMatrix;

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
    fn constant_payoff_is_discount_factor() {
        let aux = shen_aux();
        let one = Payoff::custom(0, |_| 1.0);
        for i in 0..2 {
            let e = mc_price(&aux, &one, &[100.0], i, 1.0, 1000, 0).unwrap();
            assert_eq!(e.value, aux.beta(1.0).unwrap()[i]);
            assert_eq!(e.half_width, 0.0);
        }
    }

    #[test]
    fn identity_payoff_has_unit_delta() {
        let aux = shen_aux();
        let id = Payoff::custom(1, |s| s[0]).with_gradient(|_, g| g[0] = 1.0);
        let out = mc_evaluate(&aux, &[id], &[100.0], 0, 1.0, 50_000, 3, true).unwrap();
        let d = out.deltas[0][0];
        assert!((d.value - 1.0).abs() < 1.5 * d.half_width.max(1e-12), "{d:?}");
        let v = out.values[0];
        assert!((v.value - 100.0).abs() < 1.5 * v.half_width);
    }

    #[test]
    fn single_regime_matches_black_scholes() {
        let m = RegimeModel::scalar(&[0.1], &[0.3], &[0.03], DMatrix::zeros(1, 1)).unwrap();
        let aux = AuxFunctions::new(&m);
        let e = mc_price(&aux, &Payoff::call(105.0), &[100.0], 0, 0.5, 100_000, 1).unwrap();
        let bs = bs_price(100.0, 105.0, 0.3, 0.03, 0.5, OptionKind::Call).value;
        assert!((e.value - bs).abs() <= e.half_width, "{} vs {bs}", e.value);
    }

    #[test]
    fn argument_errors() {
        let aux = shen_aux();
        let c = Payoff::call(100.0);
        assert!(matches!(mc_price(&aux, &c, &[100.0], 0, 1.0, 1, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(mc_price(&aux, &c, &[100.0, 1.0], 0, 1.0, 10, 0), Err(Error::DimensionMismatch(_))));
        assert!(matches!(mc_price(&aux, &c, &[100.0], 2, 1.0, 10, 0), Err(Error::InvalidArgument(_))));
        let bare = Payoff::custom(1, |s| s[0]);
        assert!(matches!(mc_delta(&aux, &bare, &[100.0], 0, 1.0, 10, 0), Err(Error::MissingGradient)));
    }

    #[test]
    fn same_seed_same_answer() {
        let aux = shen_aux();
        let c = Payoff::call(100.0);
        let a = mc_price(&aux, &c, &[100.0], 1, 1.0, 20_000, 9).unwrap();
        let b = mc_price(&aux, &c, &[100.0], 1, 1.0, 20_000, 9).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.half_width.to_bits(), b.half_width.to_bits());
    }
}
