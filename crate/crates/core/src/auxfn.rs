//! Deterministic functions of the regime chain: the normalisers gamma and
//! delta, the stochastic discount beta, the time-dependent generators used by
//! the pricing measures, the Feynman-Kac exponential and characteristic
//! functions of the log-return.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{RegimeModel, RiskQuantities};

/// Which time-dependent generator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// The physical generator.
    Constant,
    /// Off-diagonals reweighted by `gamma_j(t) / gamma_i(t)`.
    Tilde,
    /// Off-diagonals reweighted by `delta_j(t) / delta_i(t)`.
    Arrow,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Constant => "constant",
            GeneratorKind::Tilde => "tilde",
            GeneratorKind::Arrow => "arrow",
        }
    }
}

/// Dominating rate for uniformization of a generator over a horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformizationBound {
    pub lambda: f64,
    /// Largest exit rate found on the grid, before the safety factor.
    pub sup_rate: f64,
    pub grid_points: usize,
    pub kind: GeneratorKind,
    pub horizon: f64,
}

pub const BOUND_GRID_POINTS: usize = 10_001;
pub const BOUND_SAFETY: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct AuxFunctions {
    model: RegimeModel,
    risk: RiskQuantities,
    /// `Lambda - D(ell)`
    gamma_rate: DMatrix<f64>,
    /// `Lambda - D(ell + r)`
    delta_rate: DMatrix<f64>,
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}

impl AuxFunctions {
    pub fn new(model: &RegimeModel) -> Self {
        let risk = model.risk_quantities();
        let l = model.regimes();
        let g = model.generator();
        let gamma_rate = DMatrix::from_fn(l, l, |i, j| g[(i, j)] - if i == j { risk.ell[i] } else { 0.0 });
        let delta_rate = DMatrix::from_fn(l, l, |i, j| {
            g[(i, j)] - if i == j { risk.ell[i] + model.rate(i) } else { 0.0 }
        });
        Self { model: model.clone(), risk, gamma_rate, delta_rate }
    }

    pub fn model(&self) -> &RegimeModel {
        &self.model
    }

    pub fn risk(&self) -> &RiskQuantities {
        &self.risk
    }

    pub fn regimes(&self) -> usize {
        self.model.regimes()
    }

    pub fn gamma(&self, t: f64) -> Result<DVector<f64>> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(DVector::from_element(self.regimes(), 1.0));
        }
        Ok(linalg::expm_times_ones(&self.gamma_rate, t))
    }

    pub fn delta(&self, t: f64) -> Result<DVector<f64>> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(DVector::from_element(self.regimes(), 1.0));
        }
        Ok(linalg::expm_times_ones(&self.delta_rate, t))
    }

    /// `delta(t) / gamma(t)` componentwise.
    pub fn beta(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.delta(t)?.component_div(&self.gamma(t)?))
    }

    pub fn tilde_generator(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.reweighted(&self.gamma(t)?))
    }

    pub fn arrow_generator(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.reweighted(&self.delta(t)?))
    }

    pub fn generator(&self, kind: GeneratorKind, t: f64) -> Result<DMatrix<f64>> {
        match kind {
            GeneratorKind::Constant => {
                check_time(t)?;
                Ok(self.model.generator().clone())
            }
            GeneratorKind::Tilde => self.tilde_generator(t),
            GeneratorKind::Arrow => self.arrow_generator(t),
        }
    }

    fn reweighted(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let g = self.model.generator();
        let l = g.nrows();
        let mut out = DMatrix::zeros(l, l);
        for i in 0..l {
            let mut exit = 0.0;
            for j in 0..l {
                if i != j {
                    let q = g[(i, j)] * w[j] / w[i];
                    out[(i, j)] = q;
                    exit += q;
                }
            }
            out[(i, i)] = -exit;
        }
        out
    }

    /// `lambda = (1 + 1e-3) * max_{t, i} -(Lambda_t)_ii` over an equispaced
    /// grid of [0, horizon].
    pub fn uniformization_bound(&self, kind: GeneratorKind, horizon: f64) -> Result<UniformizationBound> {
        self.uniformization_bound_with_grid(kind, horizon, BOUND_GRID_POINTS)
    }

    pub fn uniformization_bound_with_grid(
        &self,
        kind: GeneratorKind,
        horizon: f64,
        points: usize,
    ) -> Result<UniformizationBound> {
        check_time(horizon)?;
        let points = points.max(2);
        let sup_rate = if kind == GeneratorKind::Constant || horizon == 0.0 {
            max_exit_rate(self.model.generator())
        } else {
            let mut best = 0.0f64;
            for k in 0..points {
                let t = horizon * k as f64 / (points - 1) as f64;
                best = best.max(max_exit_rate(&self.generator(kind, t)?));
            }
            best
        };
        Ok(UniformizationBound {
            lambda: (1.0 + BOUND_SAFETY) * sup_rate,
            sup_rate,
            grid_points: points,
            kind,
            horizon,
        })
    }

    /// `exp(t (D(theta1 r + theta2 a - ell) + Lambda)) 1`, single asset only.
    pub fn feynman_kac_h(&self, t: f64, theta1: Complex64, theta2: Complex64) -> Result<DVector<Complex64>> {
        check_time(t)?;
        if self.model.assets() != 1 {
            return Err(Error::MultiAssetUnsupported(self.model.assets()));
        }
        let l = self.regimes();
        if t == 0.0 {
            return Ok(DVector::from_element(l, Complex64::new(1.0, 0.0)));
        }
        let g = self.model.generator();
        let m = DMatrix::from_fn(l, l, |i, j| {
            let mut z = Complex64::new(g[(i, j)], 0.0);
            if i == j {
                z += theta1 * self.model.rate(i) + theta2 * self.model.cov(i)[(0, 0)] - self.risk.ell[i];
            }
            z
        });
        Ok(linalg::expm_times_ones_c(&m, t))
    }

    /// Laplace transform `E[(S_T / s)^theta]` under the forward law, started
    /// in regime `i` with `horizon` to maturity.
    pub fn char_fn_forward(&self, i: usize, horizon: f64, theta: Complex64) -> Result<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let h = self.feynman_kac_h(horizon, theta - one, theta * (theta - one) * 0.5)?;
        Ok(h[i] / self.delta(horizon)?[i])
    }

    /// Same under the check law, the forward law tilted by `S_T`.
    pub fn char_fn_check(&self, i: usize, horizon: f64, theta: Complex64) -> Result<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let h = self.feynman_kac_h(horizon, theta, theta * (theta + one) * 0.5)?;
        Ok(h[i] / self.gamma(horizon)?[i])
    }

    /// Both transforms for every starting regime at once.
    pub(crate) fn char_fns(&self, horizon: f64, theta: Complex64, delta: &DVector<f64>, gamma: &DVector<f64>) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
        let one = Complex64::new(1.0, 0.0);
        let fwd = self.feynman_kac_h(horizon, theta - one, theta * (theta - one) * 0.5)?;
        let chk = self.feynman_kac_h(horizon, theta, theta * (theta + one) * 0.5)?;
        let fwd = DVector::from_fn(fwd.len(), |i, _| fwd[i] / delta[i]);
        let chk = DVector::from_fn(chk.len(), |i, _| chk[i] / gamma[i]);
        Ok((fwd, chk))
    }
}

pub(crate) fn max_exit_rate(g: &DMatrix<f64>) -> f64 {
    (0..g.nrows()).map(|i| -g[(i, i)]).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn shen() -> RegimeModel {
        RegimeModel::scalar(
            &[0.04, 0.08],
            &[0.4, 0.2],
            &[0.02, 0.04],
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]),
        )
        .unwrap()
    }

    #[test]
    fn starts_at_one() {
        let aux = AuxFunctions::new(&shen());
        for v in [aux.gamma(0.0).unwrap(), aux.delta(0.0).unwrap(), aux.beta(0.0).unwrap()] {
            assert!(v.iter().all(|&x| x == 1.0));
        }
        assert_eq!(aux.tilde_generator(0.0).unwrap(), *aux.model().generator());
        assert_eq!(aux.arrow_generator(0.0).unwrap(), *aux.model().generator());
        assert!(matches!(aux.gamma(-1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn shen_discount_at_one_year() {
        let b = AuxFunctions::new(&shen()).beta(1.0).unwrap();
        assert_abs_diff_eq!(b[0], 0.9767, epsilon = 5e-5);
        assert_abs_diff_eq!(b[1], 0.9644, epsilon = 5e-5);
    }

    #[test]
    fn single_regime_is_scalar_exponential() {
        let m = RegimeModel::scalar(&[0.05], &[0.2], &[0.02], DMatrix::zeros(1, 1)).unwrap();
        let aux = AuxFunctions::new(&m);
        let ell = 0.03f64.powi(2) / 0.04;
        let t = 1.7;
        assert_abs_diff_eq!(aux.gamma(t).unwrap()[0], (-ell * t).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(aux.delta(t).unwrap()[0], (-(ell + 0.02) * t).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(aux.beta(t).unwrap()[0], (-0.02 * t).exp(), epsilon = 1e-14);
    }

    #[test]
    fn constant_rate_collapses_arrow_to_tilde() {
        let m = RegimeModel::scalar(
            &[-0.3436, 0.4813],
            &[0.4486, 0.1945],
            &[0.0216, 0.0216],
            DMatrix::from_row_slice(2, 2, &[-71.862, 71.862, 17.6661, -17.6661]),
        )
        .unwrap();
        let aux = AuxFunctions::new(&m);
        for t in [0.01, 0.05, 20.0 / 252.0] {
            let b = aux.beta(t).unwrap();
            assert!(b.iter().all(|&x| (x - (-0.0216 * t).exp()).abs() < 1e-12));
            let diff = aux.tilde_generator(t).unwrap() - aux.arrow_generator(t).unwrap();
            assert!(diff.abs().max() < 1e-12 * 72.0);
        }
    }

    #[test]
    fn shen_bound_matches_sup_of_exit_rate() {
        let aux = AuxFunctions::new(&shen());
        let b = aux.uniformization_bound(GeneratorKind::Arrow, 1.0).unwrap();
        assert_abs_diff_eq!(b.sup_rate, 0.5185, epsilon = 1e-3);
        assert_abs_diff_eq!(b.lambda, b.sup_rate * 1.001, epsilon = 1e-15);
        let c = aux.uniformization_bound(GeneratorKind::Constant, 1.0).unwrap();
        assert_abs_diff_eq!(c.lambda, 0.5 * 1.001, epsilon = 1e-15);
    }

    #[test]
    fn feynman_kac_identities() {
        let aux = AuxFunctions::new(&shen());
        let z = Complex64::new(0.0, 0.0);
        let t = 0.8;
        let g = aux.gamma(t).unwrap();
        let d = aux.delta(t).unwrap();
        let h00 = aux.feynman_kac_h(t, z, z).unwrap();
        let hm = aux.feynman_kac_h(t, Complex64::new(-1.0, 0.0), z).unwrap();
        for i in 0..2 {
            assert!((h00[i] - g[i]).norm() < 1e-10);
            assert!((hm[i] - d[i]).norm() < 1e-10);
        }
        let h0 = aux.feynman_kac_h(0.0, Complex64::new(3.0, 1.0), Complex64::new(-2.0, 5.0)).unwrap();
        assert!(h0.iter().all(|&x| x == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn char_fn_normalisation() {
        let aux = AuxFunctions::new(&shen());
        let h = 0.6;
        let beta = aux.beta(h).unwrap();
        for i in 0..2 {
            let at0 = aux.char_fn_forward(i, h, Complex64::new(0.0, 0.0)).unwrap();
            assert!((at0 - 1.0).norm() < 1e-12);
            let at1 = aux.char_fn_forward(i, h, Complex64::new(1.0, 0.0)).unwrap();
            assert!((at1 - 1.0 / beta[i]).norm() < 1e-12);
            let chk0 = aux.char_fn_check(i, h, Complex64::new(0.0, 0.0)).unwrap();
            assert!((chk0 - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn single_regime_char_fn_is_lognormal() {
        let (r, s) = (0.03, 0.25);
        let m = RegimeModel::scalar(&[0.07], &[s], &[r], DMatrix::zeros(1, 1)).unwrap();
        let aux = AuxFunctions::new(&m);
        let h = 0.9;
        let a = s * s;
        for u in [0.1, 1.0, 4.0, 17.0] {
            let got = aux.char_fn_forward(0, h, Complex64::new(0.0, u)).unwrap();
            let want = Complex64::new(-0.5 * u * u * a * h, u * (r - 0.5 * a) * h).exp();
            assert!((got - want).norm() < 1e-13, "u={u}");
        }
    }

    #[test]
    fn multi_asset_is_rejected_for_transforms() {
        let m = RegimeModel::new(
            vec![DVector::from_vec(vec![0.05, 0.05])],
            vec![DMatrix::identity(2, 2) * 0.2],
            vec![0.01],
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let aux = AuxFunctions::new(&m);
        let z = Complex64::new(0.0, 0.0);
        assert!(matches!(aux.feynman_kac_h(1.0, z, z), Err(Error::MultiAssetUnsupported(2))));
        assert!(aux.gamma(1.0).is_ok());
    }

    /// Independent oracle: holding-time simulation of the homogeneous chain.
    #[test]
    fn gamma_matches_holding_time_simulation() {
        use crate::rng;
        let model = shen();
        let aux = AuxFunctions::new(&model);
        let ell = &aux.risk().ell;
        let t_end = 1.0;
        let n = 100_000;
        for start in 0..2 {
            let mut r = rng::stream(11, &[start as u64], 0);
            let mut stats = crate::stats::RunningStats::new();
            for _ in 0..n {
                let (mut state, mut t, mut acc) = (start, 0.0, 0.0);
                loop {
                    let hold = -rng::open_uniform(&mut r).ln() / 0.5;
                    let stop = (t + hold).min(t_end);
                    acc += ell[state] * (stop - t);
                    if t + hold >= t_end {
                        break;
                    }
                    t += hold;
                    state = 1 - state;
                }
                stats.push((-acc).exp());
            }
            let g = aux.gamma(t_end).unwrap()[start];
            assert!((stats.mean() - g).abs() < 3.0 * stats.std_error(), "regime {start}");
        }
    }

    fn random_model() -> impl Strategy<Value = RegimeModel> {
        (2usize..=4)
            .prop_flat_map(|l| {
                (
                    prop::collection::vec(-0.3f64..0.6, l),
                    prop::collection::vec(0.05f64..0.8, l),
                    prop::collection::vec(0.0f64..0.1, l),
                    prop::collection::vec(0.0f64..3.0, l * l),
                )
            })
            .prop_map(|(mu, sigma, r, rates)| {
                let l = mu.len();
                let mut g = DMatrix::from_fn(l, l, |i, j| if i == j { 0.0 } else { rates[i * l + j] });
                for i in 0..l {
                    let s: f64 = g.row(i).sum();
                    g[(i, i)] = -s;
                }
                RegimeModel::scalar(&mu, &sigma, &r, g).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn gamma_delta_bounds(model in random_model(), t in 0.0f64..5.0) {
            let aux = AuxFunctions::new(&model);
            let g = aux.gamma(t).unwrap();
            let d = aux.delta(t).unwrap();
            let gen = model.generator();
            let ell = &aux.risk().ell;
            for i in 0..model.regimes() {
                let lo_g = ((gen[(i, i)] - ell[i]) * t).exp();
                let lo_d = ((gen[(i, i)] - ell[i] - model.rate(i)) * t).exp();
                prop_assert!(g[i] >= lo_g * (1.0 - 1e-12) && g[i] <= 1.0 + 1e-12);
                prop_assert!(d[i] >= lo_d * (1.0 - 1e-12) && d[i] <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn reweighted_generators_are_generators(model in random_model(), t in 0.0f64..5.0) {
            let aux = AuxFunctions::new(&model);
            for kind in [GeneratorKind::Tilde, GeneratorKind::Arrow] {
                let g = aux.generator(kind, t).unwrap();
                for i in 0..g.nrows() {
                    let scale = g.row(i).abs().max().max(1.0);
                    prop_assert!(g.row(i).sum().abs() <= 1e-10 * scale);
                    for j in 0..g.ncols() {
                        if i != j {
                            prop_assert!(g[(i, j)] >= 0.0);
                        }
                    }
                }
            }
        }

        #[test]
        fn ode_finite_differences(model in random_model(), t in 0.05f64..3.0) {
            let aux = AuxFunctions::new(&model);
            let eps = 1e-5;
            let gen = model.generator();
            let ell = &aux.risk().ell;
            let fd = |f: &dyn Fn(f64) -> DVector<f64>| (f(t + eps) - f(t - eps)) / (2.0 * eps);
            let g = aux.gamma(t).unwrap();
            let d = aux.delta(t).unwrap();
            let b = aux.beta(t).unwrap();
            let dg = fd(&|s| aux.gamma(s).unwrap());
            let dd = fd(&|s| aux.delta(s).unwrap());
            let db = fd(&|s| aux.beta(s).unwrap());
            let gg = gen * &g;
            let gd = gen * &d;
            let tilde = aux.tilde_generator(t).unwrap();
            let arrow = aux.arrow_generator(t).unwrap();
            for i in 0..model.regimes() {
                prop_assert!((dg[i] - (-ell[i] * g[i] + gg[i])).abs() < 1e-6);
                prop_assert!((dd[i] - (-(ell[i] + model.rate(i)) * d[i] + gd[i])).abs() < 1e-6);
                let rhs = -model.rate(i) * b[i] + tilde[(i, i)] * b[i] - arrow[(i, i)] * b[i];
                prop_assert!((db[i] - rhs).abs() < 1e-6);
            }
        }

        #[test]
        fn gamma_scaled_by_lower_rate_is_nondecreasing(model in random_model()) {
            let aux = AuxFunctions::new(&model);
            let gen = model.generator();
            let ell = &aux.risk().ell;
            let mut prev = vec![1.0; model.regimes()];
            for k in 1..=40 {
                let t = 0.1 * k as f64;
                let g = aux.gamma(t).unwrap();
                for i in 0..model.regimes() {
                    let v = g[i] * ((ell[i] - gen[(i, i)]) * t).exp();
                    prop_assert!(v >= prev[i] * (1.0 - 1e-12));
                    prev[i] = v;
                }
            }
        }

        #[test]
        fn char_fn_modulus_at_most_one(model in random_model(), h in 0.0f64..3.0, u in -50.0f64..50.0) {
            let aux = AuxFunctions::new(&model);
            for i in 0..model.regimes() {
                let f = aux.char_fn_forward(i, h, Complex64::new(0.0, u)).unwrap();
                let c = aux.char_fn_check(i, h, Complex64::new(0.0, u)).unwrap();
                prop_assert!(f.norm() <= 1.0 + 1e-10);
                prop_assert!(c.norm() <= 1.0 + 1e-10);
            }
        }
    }
}
