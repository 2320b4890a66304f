//! Black-Scholes prices with unit spot and zero rates, and their inversion.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Call price `N(d1) - e^k N(d2)` for log-moneyness `k`.
pub fn bs_call_price(vol: f64, k: f64, maturity: f64) -> f64 {
    bs_price(OptionKind::Call, vol, k, maturity)
}

pub fn bs_put_price(vol: f64, k: f64, maturity: f64) -> f64 {
    bs_price(OptionKind::Put, vol, k, maturity)
}

pub fn bs_price(kind: OptionKind, vol: f64, k: f64, maturity: f64) -> f64 {
    let strike = k.exp();
    let w = vol * maturity.sqrt();
    if w == 0.0 {
        return match kind {
            OptionKind::Call => (1.0 - strike).max(0.0),
            OptionKind::Put => (strike - 1.0).max(0.0),
        };
    }
    if w.is_infinite() {
        return match kind {
            OptionKind::Call => 1.0,
            OptionKind::Put => strike,
        };
    }
    let d1 = -k / w + 0.5 * w;
    let d2 = d1 - w;
    match kind {
        OptionKind::Call => norm_cdf(d1) - strike * norm_cdf(d2),
        OptionKind::Put => strike * norm_cdf(-d2) - norm_cdf(-d1),
    }
}

/// `dPrice/dvol`, identical for calls and puts.
pub fn bs_vega(vol: f64, k: f64, maturity: f64) -> f64 {
    let sqrt_t = maturity.sqrt();
    let w = vol * sqrt_t;
    if w == 0.0 {
        return 0.0;
    }
    norm_pdf(-k / w + 0.5 * w) * sqrt_t
}

/// Open interval of prices that have a finite positive implied volatility.
pub fn no_arbitrage_band(kind: OptionKind, k: f64) -> (f64, f64) {
    let strike = k.exp();
    match kind {
        OptionKind::Call => ((1.0 - strike).max(0.0), 1.0),
        OptionKind::Put => ((strike - 1.0).max(0.0), strike),
    }
}

/// Implied volatility of a call.
pub fn implied_vol(price: f64, k: f64, maturity: f64) -> Result<f64> {
    implied_vol_of(OptionKind::Call, price, k, maturity)
}

/// Safeguarded Newton iteration on a bracket that always contains the root.
///
/// Newton starts at the inflection point `sqrt(2|k|/T)` of the price as a function
/// of volatility, from where it converges monotonically; any step leaving the
/// bracket or failing to halve the residual falls back to bisection.
pub fn implied_vol_of(kind: OptionKind, price: f64, k: f64, maturity: f64) -> Result<f64> {
    if !(price.is_finite() && k.is_finite() && maturity.is_finite()) {
        return Err(Error::MalformedInput(format!(
            "price {price}, k {k}, T {maturity} must be finite"
        )));
    }
    if maturity <= 0.0 {
        return Err(Error::Domain(format!("T = {maturity} must be > 0")));
    }
    let (lower, upper) = no_arbitrage_band(kind, k);
    if price < lower || price > upper {
        return Err(Error::Arbitrage {
            price,
            lower,
            upper,
        });
    }
    if price == lower || price == upper {
        return Err(Error::BoundaryPrice { price });
    }

    let f = |vol: f64| bs_price(kind, vol, k, maturity) - price;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::BoundaryPrice { price });
        }
    }

    let inflection = (2.0 * k.abs() / maturity).sqrt();
    let mut vol = if inflection > lo && inflection < hi {
        inflection
    } else {
        0.5 * (lo + hi)
    };
    let mut last_residual = f64::INFINITY;
    for _ in 0..300 {
        let r = f(vol);
        if r == 0.0 {
            return Ok(vol);
        }
        if r < 0.0 {
            lo = vol;
        } else {
            hi = vol;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let vega = bs_vega(vol, k, maturity);
        let newton = vol - r / vega;
        vol = if vega > 0.0 && newton > lo && newton < hi && r.abs() < 0.5 * last_residual {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_residual = r.abs();
    }
    // Whichever bracket end prices closer.
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}
