use thiserror::Error;

/// Errors raised by model construction, evaluation and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("covariance of regime {regime} is not positive definite (eigenvalues in [{min_eig:e}, {max_eig:e}])")]
    SingularCovariance {
        regime: usize,
        min_eig: f64,
        max_eig: f64,
    },

    #[error("negative interest rate {rate} in regime {regime}")]
    NegativeRate { regime: usize, rate: f64 },

    #[error("non-positive volatility {vol} in regime {regime}")]
    NonPositiveVol { regime: usize, vol: f64 },

    #[error(
        "no valid generator for this transition matrix: {reason}; \
         the linear approximation Lambda ~ periods * (Q - I) can be requested instead \
         (it does not satisfy exp(Lambda/periods) = Q)"
    )]
    NoValidGenerator { reason: String },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("operation only supports a single asset (d = 1), model has d = {0}")]
    MultiAssetUnsupported(usize),

    #[error("uniformization bound violated: -(Lambda_t)_ii = {rate} > lambda = {bound} at t = {time}")]
    BoundViolation { time: f64, rate: f64, bound: f64 },

    #[error("covariance factorisation failed: {0}")]
    CholeskyFailure(String),

    #[error("payoff has no gradient")]
    MissingGradient,

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("pricer failure: {0}")]
    PricerFailure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::InvalidGenerator(_)
                | Error::SingularCovariance { .. }
                | Error::NegativeRate { .. }
                | Error::NonPositiveVol { .. }
                | Error::NoValidGenerator { .. }
                | Error::NegativeTime(_)
                | Error::MultiAssetUnsupported(_)
                | Error::MissingGradient
                | Error::InvalidArgument(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
