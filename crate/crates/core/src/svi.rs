//! Evaluation of SVI variance curves and the quantities read off them: the ATM
//! level, the location of the variance minimum, the wing slopes, and the two
//! limiting expansions of `omega1` in terms of Heston parameters.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{HestonParams, SviOmegaParams, SviRawParams};

/// Asymptotic slopes of an implied-variance curve. `left` is the slope as the
/// coordinate tends to minus infinity, so it is non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WingSlopes {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmileDiagnostics {
    /// Implied variance at `x = 0`, equal to `omega1`.
    pub atm_variance: f64,
    /// Scaled log-moneyness of the variance minimum.
    pub min_location: f64,
    /// Wing slope of variance in `x` as `x -> -inf`.
    pub left_slope: f64,
    /// Wing slope of variance in `x` as `x -> +inf`.
    pub right_slope: f64,
    /// The correlation read off the smile.
    pub orientation: f64,
}

impl SviOmegaParams {
    /// Implied variance at scaled log-moneyness `x`.
    pub fn variance(&self, x: f64) -> f64 {
        let y = self.omega2 * x;
        let rho_bar_sq = 1.0 - self.rho * self.rho;
        0.5 * self.omega1 * (1.0 + self.rho * y + ((y + self.rho).powi(2) + rho_bar_sq).sqrt())
    }

    /// `x* = -2 rho / omega2`.
    pub fn minimum_location(&self) -> f64 {
        -2.0 * self.rho / self.omega2
    }

    pub fn wing_slopes(&self) -> WingSlopes {
        let scale = 0.5 * self.omega1 * self.omega2;
        WingSlopes {
            left: -scale * (1.0 - self.rho),
            right: scale * (1.0 + self.rho),
        }
    }

    pub fn diagnostics(&self) -> SmileDiagnostics {
        let slopes = self.wing_slopes();
        SmileDiagnostics {
            atm_variance: self.variance(0.0),
            min_location: self.minimum_location(),
            left_slope: slopes.left,
            right_slope: slopes.right,
            orientation: self.rho,
        }
    }
}

impl SviRawParams {
    /// Implied variance (not total variance) at log-strike `k`.
    pub fn variance(&self, k: f64) -> f64 {
        let q = k - self.m;
        self.a
            + self.b * (self.rho_tilde * q + (q * q + self.sigma_tilde * self.sigma_tilde).sqrt())
    }

    /// `T * variance(k)`.
    pub fn total_variance(&self, k: f64) -> f64 {
        self.maturity * self.variance(k)
    }

    /// Slopes of variance in `k`: `b (1 + rho_tilde)` on the right and
    /// `-b (1 - rho_tilde)` on the left.
    pub fn wing_slopes(&self) -> WingSlopes {
        WingSlopes {
            left: -self.b * (1.0 - self.rho_tilde),
            right: self.b * (1.0 + self.rho_tilde),
        }
    }

    /// Log-strike of the variance minimum, `m - rho_tilde sigma_tilde / sqrt(1 - rho_tilde^2)`.
    pub fn minimum_location(&self) -> f64 {
        self.m - self.rho_tilde * self.sigma_tilde / (1.0 - self.rho_tilde * self.rho_tilde).sqrt()
    }
}

pub fn svi_omega_variance(s: &SviOmegaParams, x: f64) -> f64 {
    s.variance(x)
}

pub fn svi_raw_total_variance(r: &SviRawParams, k: f64) -> f64 {
    r.total_variance(k)
}

pub fn smile_minimum(s: &SviOmegaParams) -> f64 {
    s.minimum_location()
}

pub fn wing_slopes(s: &SviOmegaParams) -> WingSlopes {
    s.wing_slopes()
}

pub fn diagnostics(s: &SviOmegaParams) -> SmileDiagnostics {
    s.diagnostics()
}

/// First-order expansion of `omega1` for small vol-of-vol: `theta (1 + rho sigma / (2 kappa))`.
///
/// The error against the exact map is `O((sigma/kappa)^2)`.
pub fn omega1_small_vvol_approx(p: &HestonParams) -> Result<f64> {
    p.require_asymptotic()?;
    Ok(p.theta * (1.0 + p.rho * p.sigma / (2.0 * p.kappa)))
}

/// Expansion of `omega1` for large vol-of-vol:
/// `4 kappa theta / (sigma (1 - rho)) * (1 - 2 kappa / sigma)`.
pub fn omega1_large_vvol_approx(p: &HestonParams) -> Result<f64> {
    p.require_asymptotic()?;
    let lead = 4.0 * p.kappa * p.theta / (p.sigma * (1.0 - p.rho));
    Ok(lead * (1.0 - 2.0 * p.kappa / p.sigma))
}
