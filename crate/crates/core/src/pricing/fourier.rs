//! Single-strike Fourier pricing of European options under Heston.
//!
//! All prices are normalised by spot with zero rates, so the forward is 1 and the
//! strike is `e^k`. Along the line `Im z = -alpha` the call transform has poles at
//! `alpha = 0` and `alpha = 1`, and
//!
//! ```text
//! I(alpha) = e^{(1 - alpha) k} / pi * Int_0^inf Re[ e^{-i u k} phi_T(u - i alpha)
//!                                          / ((alpha + i u)(alpha - 1 + i u)) ] du
//! ```
//!
//! equals the call for `alpha > 1`, the call minus 1 for `0 < alpha < 1` and the
//! put for `alpha < 0`. At `alpha = 1/2` this is the symmetric `u^2 + 1/4` kernel.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::black_scholes::OptionKind;
use super::cf::{cf_unchecked, moment_interval};
use super::quadrature::integrate;
use crate::error::{Error, Result};
use crate::params::HestonParams;

const INITIAL_PANELS: usize = 32;
const ENVELOPE_REL: f64 = 1e-14;
const MAX_TRUNCATION: f64 = 1e7;
/// Fraction of the admissible interval kept clear at each end when choosing a
/// contour, away from the poles and the moment boundary.
const CONTOUR_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Upper integration limit `U`; chosen from the integrand envelope when `None`.
    pub truncation: Option<f64>,
    pub abs_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            truncation: None,
            abs_tolerance: 1e-12,
            max_subdivisions: 20_000,
        }
    }
}

impl QuadratureConfig {
    pub fn check(&self) -> Result<()> {
        if let Some(u) = self.truncation {
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::MalformedInput(format!(
                    "truncation U = {u} must be finite and > 0"
                )));
            }
        }
        if !(self.abs_tolerance.is_finite() && self.abs_tolerance > 0.0) {
            return Err(Error::MalformedInput(format!(
                "quadrature tolerance {} must be finite and > 0",
                self.abs_tolerance
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::MalformedInput(
                "max_subdivisions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Value of the contour integral with its quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourEstimate {
    pub alpha: f64,
    pub value: f64,
    pub error: f64,
    pub tolerance: f64,
    pub truncation: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OtmPrice {
    pub kind: OptionKind,
    pub k: f64,
    pub price: f64,
    pub alpha: f64,
    pub error: f64,
}

fn check_inputs(p: &HestonParams, k: f64, maturity: f64, q: &QuadratureConfig) -> Result<()> {
    p.require_structural()?;
    q.check()?;
    if !k.is_finite() {
        return Err(Error::MalformedInput(format!(
            "log-moneyness {k} is not finite"
        )));
    }
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::Domain(format!("T = {maturity} must be > 0")));
    }
    Ok(())
}

/// Evaluates `I(alpha)`. The absolute tolerance is `abs_tolerance` times
/// `min(1, scale)`, where `scale` is the size of the integrand at `u = 0`, so
/// small out-of-the-money values keep their relative accuracy.
pub fn contour_integral(
    p: &HestonParams,
    k: f64,
    maturity: f64,
    alpha: f64,
    q: &QuadratureConfig,
) -> Result<ContourEstimate> {
    check_inputs(p, k, maturity, q)?;
    let (lo, hi) = moment_interval(p)?;
    if !(alpha > lo && alpha < hi) || alpha == 0.0 || alpha == 1.0 {
        return Err(Error::Domain(format!(
            "contour alpha = {alpha} must lie in ({lo}, {hi}) away from 0 and 1"
        )));
    }
    let prefactor = ((1.0 - alpha) * k).exp() / std::f64::consts::PI;
    let shift = Complex64::new(0.0, -alpha);
    let kernel = |u: f64| {
        let denom = Complex64::new(alpha, u) * Complex64::new(alpha - 1.0, u);
        cf_unchecked(p, shift + u, maturity) / denom
    };
    let envelope = |u: f64| prefactor * kernel(u).norm();
    let env0 = envelope(0.0);
    if !env0.is_finite() {
        return Err(Error::Domain(format!(
            "moment of order {alpha} overflows at T = {maturity}"
        )));
    }
    let truncation = match q.truncation {
        Some(u) => u,
        None => {
            let mut u = 8.0;
            while u < MAX_TRUNCATION && envelope(u) * u > ENVELOPE_REL * env0 {
                u *= 2.0;
            }
            u.min(MAX_TRUNCATION)
        }
    };
    let tolerance = q.abs_tolerance * (env0 * std::f64::consts::PI).min(1.0);
    let est = integrate(
        |u: f64| prefactor * (Complex64::new(0.0, -u * k).exp() * kernel(u)).re,
        0.0,
        truncation,
        INITIAL_PANELS,
        tolerance,
        q.max_subdivisions,
    );
    if !(est.value.is_finite() && est.error <= tolerance) {
        return Err(Error::Accuracy {
            estimate: est.value,
            error_estimate: est.error,
            tolerance,
        });
    }
    Ok(ContourEstimate {
        alpha,
        value: est.value,
        error: est.error,
        tolerance,
        truncation,
        subdivisions: est.subdivisions,
    })
}

/// Normalised call price from the `u^2 + 1/4` kernel, `C = 1 + I(1/2)`.
pub fn price_call_fourier(
    p: &HestonParams,
    k: f64,
    maturity: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    Ok(1.0 + contour_integral(p, k, maturity, 0.5, q)?.value)
}

/// Normalised put price, `P = e^k + I(1/2)`.
pub fn price_put_fourier(
    p: &HestonParams,
    k: f64,
    maturity: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    Ok(k.exp() + contour_integral(p, k, maturity, 0.5, q)?.value)
}

/// Contour for the out-of-the-money option at `k`: the minimiser of the real
/// exponent `(1 - alpha) k + log E[S_T^alpha]` over `(1, p_hi)` for calls
/// (`k >= 0`) or `(p_lo, 0)` for puts, trimmed by a margin at both ends.
///
/// Returns `1/2` when no moment above one survives (large correlation regime).
pub fn otm_contour(p: &HestonParams, k: f64, maturity: f64) -> Result<f64> {
    let (lo, hi) = moment_interval(p)?;
    let (a, b) = if k >= 0.0 {
        if hi <= 1.0 {
            return Ok(0.5);
        }
        let pad = CONTOUR_MARGIN * (hi - 1.0);
        (1.0 + pad, hi - pad)
    } else {
        let pad = CONTOUR_MARGIN * -lo;
        (lo + pad, -pad)
    };
    let exponent = |alpha: f64| {
        let m = cf_unchecked(p, Complex64::new(0.0, -alpha), maturity).re;
        (1.0 - alpha) * k + m.ln()
    };
    Ok(golden_section_min(exponent, a, b, 1e-6 * (b - a)))
}

fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        // NaN (overflowed moment) compares false and pushes the search inward.
        if fc < fd || fd.is_nan() {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Price of the out-of-the-money option at `k` (call for `k >= 0`, put below),
/// integrated on the contour from [`otm_contour`] so that wing prices carry
/// relative rather than absolute accuracy.
pub fn price_otm_fourier(
    p: &HestonParams,
    k: f64,
    maturity: f64,
    q: &QuadratureConfig,
) -> Result<OtmPrice> {
    check_inputs(p, k, maturity, q)?;
    let alpha = otm_contour(p, k, maturity)?;
    let est = contour_integral(p, k, maturity, alpha, q)?;
    let (kind, price) = match (k >= 0.0, alpha > 1.0) {
        (true, true) => (OptionKind::Call, est.value),
        (true, false) => (OptionKind::Call, 1.0 + est.value),
        (false, _) => (OptionKind::Put, est.value),
    };
    Ok(OtmPrice {
        kind,
        k,
        price,
        alpha,
        error: est.error,
    })
}
