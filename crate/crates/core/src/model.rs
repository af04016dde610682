//! Market model: per-regime drift, volatility and short rate plus the
//! generator of the regime chain.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg;

const ROW_SUM_TOL: f64 = 1e-12;
const PD_RATIO: f64 = 1e-12;

/// Validated regime-switching GBM model. Immutable once built.
#[derive(Debug, Clone)]
pub struct RegimeModel {
    l: usize,
    d: usize,
    mu: Vec<DVector<f64>>,
    sigma: Vec<DMatrix<f64>>,
    a: Vec<DMatrix<f64>>,
    r: Vec<f64>,
    generator: DMatrix<f64>,
}

/// Market-price-of-risk quantities per regime.
#[derive(Debug, Clone)]
pub struct RiskQuantities {
    /// Excess drift `mu(i) - r_i 1`.
    pub m: Vec<DVector<f64>>,
    /// `a(i)^{-1} m(i)`.
    pub rho: Vec<DVector<f64>>,
    /// `m(i)' a(i)^{-1} m(i)`.
    pub ell: Vec<f64>,
}

/// How a `[transition]` section is turned into a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorPolicy {
    /// Principal matrix logarithm, must round-trip.
    #[default]
    Exact,
    /// `periods * (Q - I)`; always a generator but does not round-trip.
    LinearApprox,
}

impl RegimeModel {
    /// Builds and validates a model. `sigma[i]` is the d x d volatility matrix
    /// of regime i; covariances `a(i) = sigma sigma'` are computed once here.
    pub fn new(
        mu: Vec<DVector<f64>>,
        sigma: Vec<DMatrix<f64>>,
        r: Vec<f64>,
        generator: DMatrix<f64>,
    ) -> Result<Self> {
        let l = generator.nrows();
        if l == 0 || !generator.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "generator is {}x{}, expected a non-empty square matrix",
                generator.nrows(),
                generator.ncols()
            )));
        }
        if mu.len() != l || sigma.len() != l || r.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "generator has {l} regimes but got {} drifts, {} volatilities, {} rates",
                mu.len(),
                sigma.len(),
                r.len()
            )));
        }
        let d = mu[0].len();
        if d == 0 {
            return Err(Error::DimensionMismatch("asset count must be >= 1".into()));
        }
        for i in 0..l {
            if mu[i].len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "drift of regime {} has length {}, expected {d}",
                    i + 1,
                    mu[i].len()
                )));
            }
            if sigma[i].nrows() != d || sigma[i].ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "volatility of regime {} is {}x{}, expected {d}x{d}",
                    i + 1,
                    sigma[i].nrows(),
                    sigma[i].ncols()
                )));
            }
        }
        check_generator(&generator)?;
        for (i, &ri) in r.iter().enumerate() {
            if !(ri >= 0.0) || !ri.is_finite() {
                return Err(Error::NegativeRate { regime: i + 1, rate: ri });
            }
        }
        let mut a = Vec::with_capacity(l);
        for (i, s) in sigma.iter().enumerate() {
            let cov = s * s.transpose();
            let eig = cov.clone().symmetric_eigen().eigenvalues;
            let max_eig = eig.max();
            let min_eig = eig.min();
            if !(max_eig > 0.0) || !(min_eig > PD_RATIO * max_eig) {
                return Err(Error::SingularCovariance { regime: i + 1, min_eig, max_eig });
            }
            a.push(cov);
        }
        Ok(Self { l, d, mu, sigma, a, r, generator })
    }

    /// Single-asset convenience constructor.
    pub fn scalar(mu: &[f64], sigma: &[f64], r: &[f64], generator: DMatrix<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} drifts but {} volatilities",
                mu.len(),
                sigma.len()
            )));
        }
        Self::new(
            mu.iter().map(|&m| DVector::from_element(1, m)).collect(),
            sigma.iter().map(|&s| DMatrix::from_element(1, 1, s)).collect(),
            r.to_vec(),
            generator,
        )
    }

    pub fn regimes(&self) -> usize {
        self.l
    }

    pub fn assets(&self) -> usize {
        self.d
    }

    pub fn mu(&self, i: usize) -> &DVector<f64> {
        &self.mu[i]
    }

    pub fn sigma(&self, i: usize) -> &DMatrix<f64> {
        &self.sigma[i]
    }

    /// Cached covariance `sigma(i) sigma(i)'`.
    pub fn cov(&self, i: usize) -> &DMatrix<f64> {
        &self.a[i]
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.r[i]
    }

    pub fn rates(&self) -> &[f64] {
        &self.r
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// Copy of this model with a different generator.
    pub fn with_generator(&self, generator: DMatrix<f64>) -> Result<Self> {
        Self::new(self.mu.clone(), self.sigma.clone(), self.r.clone(), generator)
    }

    pub fn risk_quantities(&self) -> RiskQuantities {
        let mut m = Vec::with_capacity(self.l);
        let mut rho = Vec::with_capacity(self.l);
        let mut ell = Vec::with_capacity(self.l);
        for i in 0..self.l {
            let mi = &self.mu[i] - DVector::from_element(self.d, self.r[i]);
            let chol = self.a[i]
                .clone()
                .cholesky()
                .expect("covariance validated positive definite");
            let rho_i = chol.solve(&mi);
            ell.push(mi.dot(&rho_i).max(0.0));
            m.push(mi);
            rho.push(rho_i);
        }
        RiskQuantities { m, rho, ell }
    }

    /// Parses the TOML model format.
    pub fn from_toml_str(text: &str, policy: GeneratorPolicy) -> Result<Self> {
        let raw: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.into_model(policy)
    }

    pub fn from_file(path: impl AsRef<Path>, policy: GeneratorPolicy) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, policy)
    }
}

fn check_generator(g: &DMatrix<f64>) -> Result<()> {
    for (i, row) in g.row_iter().enumerate() {
        let scale = row.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        let sum: f64 = row.iter().sum();
        if !sum.is_finite() || sum.abs() > ROW_SUM_TOL * scale {
            return Err(Error::InvalidGenerator(format!("row {} sums to {sum:e}", i + 1)));
        }
        for (j, &x) in row.iter().enumerate() {
            if i != j && x < 0.0 {
                return Err(Error::InvalidGenerator(format!(
                    "negative off-diagonal rate {x} at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

fn check_stochastic(q: &DMatrix<f64>) -> Result<()> {
    if !q.is_square() || q.nrows() == 0 {
        return Err(Error::DimensionMismatch("transition matrix must be square".into()));
    }
    for (i, row) in q.row_iter().enumerate() {
        if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidArgument(format!(
                "transition row {} has entries outside [0, 1]",
                i + 1
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("transition row {} sums to {s}", i + 1)));
        }
    }
    Ok(())
}

/// Solves `Q = exp(Lambda / periods_per_year)` for a valid generator.
pub fn generator_from_transition(q: &DMatrix<f64>, periods_per_year: f64) -> Result<DMatrix<f64>> {
    check_stochastic(q)?;
    if !(periods_per_year > 0.0) {
        return Err(Error::InvalidArgument("periods_per_year must be positive".into()));
    }
    let mut g = linalg::logm(q)? * periods_per_year;
    let l = g.nrows();
    let scale = g.abs().max().max(1.0);
    for i in 0..l {
        for j in 0..l {
            if i == j {
                continue;
            }
            if g[(i, j)] < -1e-10 * scale {
                return Err(Error::NoValidGenerator {
                    reason: format!(
                        "principal logarithm has negative off-diagonal entry {:.6} at ({}, {})",
                        g[(i, j)],
                        i + 1,
                        j + 1
                    ),
                });
            }
            g[(i, j)] = g[(i, j)].max(0.0);
        }
        let off: f64 = (0..l).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
        g[(i, i)] = -off;
    }
    let back = linalg::expm(&(&g / periods_per_year));
    let err = (back - q).abs().max();
    if err > 1e-8 {
        return Err(Error::NoValidGenerator {
            reason: format!("logarithm does not round-trip (max error {err:e})"),
        });
    }
    Ok(g)
}

/// The usual fallback `periods * (Q - I)`.
pub fn linear_generator_approximation(q: &DMatrix<f64>, periods_per_year: f64) -> Result<DMatrix<f64>> {
    check_stochastic(q)?;
    let l = q.nrows();
    Ok((q - DMatrix::<f64>::identity(l, l)) * periods_per_year)
}

/// Annualised `(mu, sigma)` from per-period Gaussian return moments:
/// `sigma = sqrt(periods) vol`, `mu = periods * mean + sigma^2 / 2`.
pub fn discrete_to_continuous(
    period_means: &[f64],
    period_vols: &[f64],
    periods_per_year: f64,
) -> Result<Vec<(f64, f64)>> {
    if period_means.len() != period_vols.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} means but {} volatilities",
            period_means.len(),
            period_vols.len()
        )));
    }
    period_means
        .iter()
        .zip(period_vols)
        .enumerate()
        .map(|(i, (&mean, &vol))| {
            if !(vol > 0.0) {
                return Err(Error::NonPositiveVol { regime: i + 1, vol });
            }
            let sigma = periods_per_year.sqrt() * vol;
            Ok((periods_per_year * mean + 0.5 * sigma * sigma, sigma))
        })
        .collect()
}

// ---- TOML schema ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: ModelSection,
    regime: BTreeMap<String, RegimeSection>,
    generator: Option<RowsSection>,
    transition: Option<TransitionSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    l: usize,
    d: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Numbers {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Rows {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegimeSection {
    mu: Numbers,
    sigma: Rows,
    r: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowsSection {
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionSection {
    rows: Vec<Vec<f64>>,
    periods_per_year: f64,
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("{what} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ConfigFile {
    fn into_model(self, policy: GeneratorPolicy) -> Result<RegimeModel> {
        let ModelSection { l, d } = self.model;
        if l == 0 || d == 0 {
            return Err(Error::DimensionMismatch("l and d must be >= 1".into()));
        }
        let mut by_index = BTreeMap::new();
        for (key, section) in self.regime {
            let idx: usize = key
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("regime key '{key}' is not an integer")))?;
            if idx == 0 || idx > l {
                return Err(Error::Config(format!("regime index {idx} outside 1..={l}")));
            }
            by_index.insert(idx, section);
        }
        if by_index.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "expected {l} [regime.N] sections, found {}",
                by_index.len()
            )));
        }
        let mut mu = Vec::with_capacity(l);
        let mut sigma = Vec::with_capacity(l);
        let mut r = Vec::with_capacity(l);
        for (idx, sec) in by_index {
            let m = match sec.mu {
                Numbers::Scalar(x) if d == 1 => vec![x],
                Numbers::Vector(v) => v,
                Numbers::Scalar(_) => {
                    return Err(Error::DimensionMismatch(format!("regime {idx}: mu must have {d} entries")))
                }
            };
            if m.len() != d {
                return Err(Error::DimensionMismatch(format!("regime {idx}: mu must have {d} entries")));
            }
            let s = match sec.sigma {
                Rows::Scalar(x) if d == 1 => DMatrix::from_element(1, 1, x),
                Rows::Matrix(rows) => rows_to_matrix(&rows, d, &format!("regime {idx} sigma"))?,
                Rows::Scalar(_) => {
                    return Err(Error::DimensionMismatch(format!("regime {idx}: sigma must be {d}x{d}")))
                }
            };
            mu.push(DVector::from_vec(m));
            sigma.push(s);
            r.push(sec.r);
        }
        let generator = match (self.generator, self.transition) {
            (Some(g), None) => rows_to_matrix(&g.rows, l, "generator")?,
            (None, Some(t)) => {
                let q = rows_to_matrix(&t.rows, l, "transition")?;
                match policy {
                    GeneratorPolicy::Exact => generator_from_transition(&q, t.periods_per_year)?,
                    GeneratorPolicy::LinearApprox => linear_generator_approximation(&q, t.periods_per_year)?,
                }
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either [generator] or [transition], not both".into()))
            }
            (None, None) => return Err(Error::Config("missing [generator] or [transition] section".into())),
        };
        RegimeModel::new(mu, sigma, r, generator)
    }
}
