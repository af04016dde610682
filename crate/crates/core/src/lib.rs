//! Option pricing and variance-optimal hedging when the drift, volatility and
//! short rate of a geometric Brownian motion switch with a continuous-time
//! Markov chain.
//!
//! Regimes are 0-based everywhere in this crate.
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auxfn;
pub mod error;
pub mod hedging;
pub mod linalg;
pub mod model;
pub mod pricing;
pub mod reference;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use auxfn::{AuxFunctions, GeneratorKind, UniformizationBound};
pub use error::{Error, Result};
pub use hedging::{
    hedging_error_decomposition, martingale_diagnostics, simulate_hedge, DecompositionReport,
    HedgeConfig, HedgeOutput, HedgePathResult, HedgeRecord, HedgeStats, PricerChoice,
};
pub use model::{
    discrete_to_continuous, generator_from_transition, linear_generator_approximation,
    GeneratorPolicy, RegimeModel, RiskQuantities,
};
pub use pricing::{
    alpha, bs_delta, bs_price, fourier_call, fourier_call_delta, mc_delta, mc_evaluate, mc_price,
    Method, OptionKind, Payoff, PriceEstimate,
};
pub use simulate::{
    path_integrals, sample_regime_path, sample_terminal, Measure, PathIntegrals, RegimePath,
    TerminalSample,
};
