//! Published inputs and results for the two worked examples (a symmetric
//! two-regime model from the literature and a two-regime fit to Apple daily
//! returns), plus helpers that recompute the Monte Carlo tables.

use nalgebra::DMatrix;

use crate::auxfn::AuxFunctions;
use crate::error::Result;
use crate::model::{generator_from_transition, linear_generator_approximation, GeneratorPolicy, RegimeModel};
use crate::pricing::{mc_evaluate, Payoff, PriceEstimate};

pub const SHEN_S0: f64 = 100.0;
pub const SHEN_MATURITY: f64 = 1.0;
pub const SHEN_MU: [f64; 2] = [0.04, 0.08];
pub const SHEN_SIGMA: [f64; 2] = [0.4, 0.2];
pub const SHEN_RATE: [f64; 2] = [0.02, 0.04];
pub const SHEN_BETA: [f64; 2] = [0.9767, 0.9644];
pub const SHEN_LAMBDA: f64 = 0.5185;
pub const SHEN_STRIKES: [f64; 6] = [70.0, 80.0, 90.0, 100.0, 110.0, 120.0];

/// Fourier prices of the original risk-neutral model, `[strike][regime]`.
pub const SHEN_TABLE1: [[f64; 2]; 6] = [
    [34.0904, 33.1151],
    [26.7779, 24.5557],
    [20.6144, 17.1617],
    [15.6171, 11.3358],
    [11.6953, 7.1553],
    [8.6931, 4.3873],
];

/// One row of a published Monte Carlo table: `(center, half-width)` per
/// regime for the call value and for `phi_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub strike: f64,
    pub value: [(f64, f64); 2],
    pub phi0: [(f64, f64); 2],
}

const fn row(strike: f64, v: [(f64, f64); 2], p: [(f64, f64); 2]) -> PublishedRow {
    PublishedRow { strike, value: v, phi0: p }
}

pub const SHEN_TABLE2: [PublishedRow; 6] = [
    row(70.0, [(34.0580, 0.0489), (33.1345, 0.0347)], [(0.8935, 0.0007), (0.9547, 0.0005)]),
    row(80.0, [(26.6933, 0.0460), (24.6400, 0.0328)], [(0.8112, 0.0008), (0.8863, 0.0006)]),
    row(90.0, [(20.4806, 0.0424), (17.3062, 0.0299)], [(0.7103, 0.0009), (0.7672, 0.0008)]),
    row(100.0, [(15.4499, 0.0384), (11.5217, 0.0262)], [(0.6005, 0.0010), (0.6111, 0.0008)]),
    row(110.0, [(11.5158, 0.0343), (7.3565, 0.0222)], [(0.4931, 0.0010), (0.4492, 0.0009)]),
    row(120.0, [(8.5192, 0.0303), (4.5829, 0.0184)], [(0.3958, 0.0009), (0.3095, 0.0008)]),
];

pub const APPLE_S0: f64 = 129.95;
pub const APPLE_MATURITY: f64 = 20.0 / 252.0;
pub const APPLE_PERIODS: f64 = 252.0;
pub const APPLE_RATE: f64 = 0.0216;
pub const APPLE_TRANSITION: [[f64; 2]; 2] = [[0.76, 0.24], [0.059, 0.941]];
pub const APPLE_GENERATOR: [[f64; 2]; 2] = [[-71.8620, 71.8620], [17.6661, -17.6661]];
pub const APPLE_LAMBDA: f64 = 72.2522;
/// Daily means and volatilities of the fitted random walk.
pub const APPLE_DAILY_MEAN: [f64; 2] = [-0.0018, 0.0018];
pub const APPLE_DAILY_VOL: [f64; 2] = [0.0283, 0.0123];
/// Annualised drift and volatility as published.
pub const APPLE_MU: [f64; 2] = [-0.3436, 0.4813];
pub const APPLE_SIGMA: [f64; 2] = [0.4486, 0.1945];
pub const APPLE_BS_SIGMA: f64 = 0.2658;
pub const APPLE_STRIKES: [f64; 3] = [128.0, 129.0, 130.0];

/// Black-Scholes price and delta, `(strike, price, delta)`.
pub const APPLE_TABLE6: [(f64, f64, f64); 3] = [(128.0, 5.0304, 0.6034), (129.0, 4.4776, 0.5629), (130.0, 3.9658, 0.5220)];

pub const APPLE_TABLE8: [PublishedRow; 3] = [
    row(128.0, [(5.0210, 0.0094), (4.9813, 0.0094)], [(0.6070, 0.0007), (0.6092, 0.0007)]),
    row(129.0, [(4.4653, 0.0090), (4.4236, 0.0090)], [(0.5648, 0.0007), (0.5659, 0.0007)]),
    row(130.0, [(3.9523, 0.0085), (3.9097, 0.0085)], [(0.5222, 0.0007), (0.5222, 0.0007)]),
];

pub fn shen_model() -> RegimeModel {
    RegimeModel::scalar(&SHEN_MU, &SHEN_SIGMA, &SHEN_RATE, DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]))
        .expect("valid built-in model")
}

pub fn apple_transition() -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| APPLE_TRANSITION[i][j])
}

pub fn apple_published_generator() -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| APPLE_GENERATOR[i][j])
}

/// Apple model with the published annual parameters and the generator
/// obtained from the daily transition matrix.
pub fn apple_model(policy: GeneratorPolicy) -> Result<RegimeModel> {
    let q = apple_transition();
    let generator = match policy {
        GeneratorPolicy::Exact => generator_from_transition(&q, APPLE_PERIODS)?,
        GeneratorPolicy::LinearApprox => linear_generator_approximation(&q, APPLE_PERIODS)?,
    };
    RegimeModel::scalar(&APPLE_MU, &APPLE_SIGMA, &[APPLE_RATE, APPLE_RATE], generator)
}

/// Recomputed cell next to its published counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproducedCell {
    pub strike: f64,
    pub regime: usize,
    pub value: PriceEstimate,
    pub phi0: PriceEstimate,
    pub published_value: (f64, f64),
    pub published_phi0: (f64, f64),
}

impl ReproducedCell {
    pub fn value_overlaps(&self) -> bool {
        self.value.overlaps(self.published_value.0, self.published_value.1)
    }

    pub fn phi0_overlaps(&self) -> bool {
        self.phi0.overlaps(self.published_phi0.0, self.published_phi0.1)
    }
}

/// Call values and `phi_0` for every row and both regimes from one shared
/// forward-measure sample per regime.
pub fn reproduce_table(
    aux: &AuxFunctions,
    s0: f64,
    maturity: f64,
    table: &[PublishedRow],
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<ReproducedCell>> {
    let payoffs: Vec<Payoff> = table.iter().map(|r| Payoff::call(r.strike)).collect();
    let mut cells = Vec::with_capacity(2 * table.len());
    let per_regime = (0..2)
        .map(|i| mc_evaluate(aux, &payoffs, &[s0], i, maturity, n_pairs, seed, true))
        .collect::<Result<Vec<_>>>()?;
    for (k, r) in table.iter().enumerate() {
        for (i, out) in per_regime.iter().enumerate() {
            cells.push(ReproducedCell {
                strike: r.strike,
                regime: i,
                value: out.values[k],
                phi0: out.deltas[k][0],
                published_value: r.value[i],
                published_phi0: r.phi0[i],
            });
        }
    }
    Ok(cells)
}

pub fn shen_table2(n_pairs: usize, seed: u64) -> Result<Vec<ReproducedCell>> {
    let aux = AuxFunctions::new(&shen_model());
    reproduce_table(&aux, SHEN_S0, SHEN_MATURITY, &SHEN_TABLE2, n_pairs, seed)
}

pub fn apple_table8(policy: GeneratorPolicy, n_pairs: usize, seed: u64) -> Result<Vec<ReproducedCell>> {
    let aux = AuxFunctions::new(&apple_model(policy)?);
    reproduce_table(&aux, APPLE_S0, APPLE_MATURITY, &APPLE_TABLE8, n_pairs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_models_are_valid() {
        assert_eq!(shen_model().regimes(), 2);
        let apple = apple_model(GeneratorPolicy::Exact).unwrap();
        assert!(apple.generator()[(0, 1)] > 70.0);
        let approx = apple_model(GeneratorPolicy::LinearApprox).unwrap();
        assert!((approx.generator()[(0, 1)] - 252.0 * 0.24).abs() < 1e-9);
    }

    #[test]
    fn published_table_shapes() {
        assert!(SHEN_TABLE2.iter().zip(SHEN_STRIKES).all(|(r, k)| r.strike == k));
        assert!(APPLE_TABLE8.iter().zip(APPLE_STRIKES).all(|(r, k)| r.strike == k));
    }
}
