use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{DerivedConstants, HestonParams};

/// Interval of real moments `E[S_T^p]` that stay finite at every maturity.
///
/// In the large correlation regime moments above one explode in finite time, so
/// the interval is cut at one.
pub fn moment_interval(p: &HestonParams) -> Result<(f64, f64)> {
    let c = DerivedConstants::new(p)?;
    let hi = if p.kappa - p.rho * p.sigma > 0.0 {
        c.p_plus
    } else {
        1.0
    };
    Ok((c.p_minus, hi))
}

/// Characteristic function `E[exp(i z log(S_T / S_0))]` of the Heston log-price
/// with zero rates.
///
/// Uses the formulation with `g = (b - d) / (b + d)` and `exp(-d T)`, which keeps
/// the complex logarithm on its principal branch for all maturities. Valid for
/// `-Im z` inside [`moment_interval`].
pub fn heston_cf(p: &HestonParams, z: Complex64, maturity: f64) -> Result<Complex64> {
    p.require_structural()?;
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::Domain(format!("T = {maturity} must be > 0")));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::MalformedInput(format!("z = {z} is not finite")));
    }
    let (lo, hi) = moment_interval(p)?;
    let moment = -z.im;
    if !(moment >= lo && moment <= hi) {
        return Err(Error::Domain(format!(
            "-Im z = {moment} outside the moment interval [{lo}, {hi}]"
        )));
    }
    let value = cf_unchecked(p, z, maturity);
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::Domain(format!(
            "characteristic function overflowed at z = {z}, T = {maturity}"
        )));
    }
    Ok(value)
}

pub(crate) fn cf_unchecked(p: &HestonParams, z: Complex64, maturity: f64) -> Complex64 {
    let HestonParams {
        kappa,
        theta,
        sigma,
        rho,
        v0,
    } = *p;
    let one = Complex64::new(1.0, 0.0);
    let iz = Complex64::i() * z;
    let b = kappa - rho * sigma * iz;
    let sigma_sq = sigma * sigma;
    // b^2 - d^2 = -sigma^2 (i z + z^2)
    let gap = sigma_sq * (iz + z * z);
    if gap.norm() == 0.0 {
        // z = 0 or z = -i: the exponent vanishes identically.
        return one;
    }
    let d = (b * b + gap).sqrt();
    let sum = b + d;
    let naive = b - d;
    let b_minus_d = if sum.norm() >= naive.norm() {
        -gap / sum
    } else {
        naive
    };
    let g = b_minus_d / sum;
    let e = (-d * maturity).exp();
    // log((1 - g e) / (1 - g)) = log(1 + w); g is O(sigma^2) for small vol-of-vol.
    let log_term = ln_1p(g * (one - e) / (one - g));
    let c = kappa * theta / sigma_sq * (b_minus_d * maturity - 2.0 * log_term);
    let dd = b_minus_d / sigma_sq * (one - e) / (one - g * e);
    (c + dd * v0).exp()
}

fn ln_1p(w: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p();
    Complex64::new(re, w.im.atan2(1.0 + w.re))
}
