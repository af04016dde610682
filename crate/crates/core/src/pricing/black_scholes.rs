use statrs::distribution::{ContinuousCDF, Normal};

use super::{Method, OptionKind, PriceEstimate};

fn d1_d2(s: f64, k: f64, sigma: f64, r: f64, t: f64) -> (f64, f64) {
    let vt = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / vt;
    (d1, d1 - vt)
}

/// Black-Scholes price of a call or put. Degenerate inputs (`t = 0`,
/// `sigma = 0` or `k = 0`) give the discounted intrinsic value.
pub fn bs_price(s: f64, k: f64, sigma: f64, r: f64, t: f64, kind: OptionKind) -> PriceEstimate {
    let df = (-r * t).exp();
    let value = if k <= 0.0 {
        match kind {
            OptionKind::Put => 0.0,
            _ => s - k * df,
        }
    } else if t <= 0.0 || sigma <= 0.0 {
        match kind {
            OptionKind::Put => (k * df - s).max(0.0),
            _ => (s - k * df).max(0.0),
        }
    } else {
        let n = Normal::standard();
        let (d1, d2) = d1_d2(s, k, sigma, r, t);
        match kind {
            OptionKind::Put => k * df * n.cdf(-d2) - s * n.cdf(-d1),
            _ => s * n.cdf(d1) - k * df * n.cdf(d2),
        }
    };
    PriceEstimate::exact(value, Method::BlackScholes, None)
}

pub fn bs_delta(s: f64, k: f64, sigma: f64, r: f64, t: f64, kind: OptionKind) -> f64 {
    let call = if k <= 0.0 {
        1.0
    } else if t <= 0.0 || sigma <= 0.0 {
        if s > k * (-r * t).exp() { 1.0 } else { 0.0 }
    } else {
        Normal::standard().cdf(d1_d2(s, k, sigma, r, t).0)
    };
    match kind {
        OptionKind::Put => call - 1.0,
        _ => call,
    }
}
