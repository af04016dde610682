//! European option valuation.

use std::fmt;
use std::sync::Arc;

use crate::auxfn::AuxFunctions;
use crate::error::{Error, Result};
use crate::simulate::Measure;

mod black_scholes;
mod engines;
mod fourier;
mod mc;

pub use black_scholes::{bs_delta, bs_price};
pub use engines::{GridPricer, NestedMcPricer, DEFAULT_INNER_PAIRS};
pub use fourier::{fourier_call, fourier_call_delta, gauss_legendre, FourierPricer, TailTable};
pub use mc::{mc_delta, mc_evaluate, mc_price, McOutput};

pub type PayoffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
    Custom,
}

/// Terminal payoff of a European claim.
#[derive(Clone)]
pub enum Payoff {
    Call { strike: f64, asset: usize },
    Put { strike: f64, asset: usize },
    Custom {
        value: PayoffFn,
        gradient: Option<GradientFn>,
        /// Polynomial growth order.
        degree: u32,
    },
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Call { strike, asset } => write!(f, "Call(K={strike}, asset={asset})"),
            Payoff::Put { strike, asset } => write!(f, "Put(K={strike}, asset={asset})"),
            Payoff::Custom { gradient, degree, .. } => {
                write!(f, "Custom(degree={degree}, gradient={})", gradient.is_some())
            }
        }
    }
}

impl Payoff {
    pub fn call(strike: f64) -> Self {
        Payoff::Call { strike, asset: 0 }
    }

    pub fn put(strike: f64) -> Self {
        Payoff::Put { strike, asset: 0 }
    }

    pub fn custom<F>(degree: u32, value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Payoff::Custom { value: Arc::new(value), gradient: None, degree }
    }

    pub fn with_gradient<G>(self, grad: G) -> Self
    where
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        match self {
            Payoff::Custom { value, degree, .. } => Payoff::Custom { value, gradient: Some(Arc::new(grad)), degree },
            other => other,
        }
    }

    pub fn kind(&self) -> OptionKind {
        match self {
            Payoff::Call { .. } => OptionKind::Call,
            Payoff::Put { .. } => OptionKind::Put,
            Payoff::Custom { .. } => OptionKind::Custom,
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match self {
            Payoff::Call { strike, .. } | Payoff::Put { strike, .. } => Some(*strike),
            Payoff::Custom { .. } => None,
        }
    }

    pub fn degree(&self) -> u32 {
        match self {
            Payoff::Call { .. } => 1,
            Payoff::Put { .. } => 0,
            Payoff::Custom { degree, .. } => *degree,
        }
    }

    pub fn has_gradient(&self) -> bool {
        !matches!(self, Payoff::Custom { gradient: None, .. })
    }

    pub(crate) fn check_assets(&self, d: usize) -> Result<()> {
        match self {
            Payoff::Call { asset, .. } | Payoff::Put { asset, .. } if *asset >= d => Err(Error::DimensionMismatch(
                format!("payoff refers to asset {} of {d}", asset + 1),
            )),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn value(&self, s: &[f64]) -> f64 {
        match self {
            Payoff::Call { strike, asset } => (s[*asset] - strike).max(0.0),
            Payoff::Put { strike, asset } => (strike - s[*asset]).max(0.0),
            Payoff::Custom { value, .. } => value(s),
        }
    }

    /// Writes the a.e. gradient into `out`.
    #[inline]
    pub fn gradient(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Payoff::Call { strike, asset } => {
                out.iter_mut().for_each(|x| *x = 0.0);
                out[*asset] = if s[*asset] > *strike { 1.0 } else { 0.0 };
            }
            Payoff::Put { strike, asset } => {
                out.iter_mut().for_each(|x| *x = 0.0);
                out[*asset] = if s[*asset] < *strike { -1.0 } else { 0.0 };
            }
            Payoff::Custom { gradient: Some(g), .. } => g(s, out),
            Payoff::Custom { gradient: None, .. } => return Err(Error::MissingGradient),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    Fourier,
    BlackScholes,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MonteCarlo => "mc",
            Method::Fourier => "fourier",
            Method::BlackScholes => "black_scholes",
        }
    }
}

/// Point estimate with a 95% half-width (zero for deterministic methods).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceEstimate {
    pub value: f64,
    pub half_width: f64,
    pub n: u64,
    pub method: Method,
    pub measure: Option<Measure>,
    pub regime: Option<usize>,
}

impl PriceEstimate {
    pub fn exact(value: f64, method: Method, regime: Option<usize>) -> Self {
        Self { value, half_width: 0.0, n: 0, method, measure: None, regime }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }

    /// Whether `[value +- half_width]` meets `[center +- width]`.
    pub fn overlaps(&self, center: f64, width: f64) -> bool {
        self.lower() <= center + width && center - width <= self.upper()
    }
}

/// Anything able to give `C` and `grad_s C` at a state with a given time to
/// maturity. `key` identifies the caller (outer path, grid index) for pricers
/// that need their own random streams.
pub trait OptionPricer: Send + Sync {
    fn value_and_gradient(&self, horizon: f64, s: &[f64], regime: usize, key: (u64, u64)) -> Result<(f64, Vec<f64>)>;
}

/// `grad C + C D(s)^{-1} rho(i)`.
pub fn alpha(
    pricer: &dyn OptionPricer,
    aux: &AuxFunctions,
    horizon: f64,
    s: &[f64],
    regime: usize,
) -> Result<Vec<f64>> {
    let (c, mut grad) = pricer.value_and_gradient(horizon, s, regime, (0, 0))?;
    let rho = &aux.risk().rho[regime];
    for (j, g) in grad.iter_mut().enumerate() {
        *g += c * rho[j] / s[j];
    }
    Ok(grad)
}
