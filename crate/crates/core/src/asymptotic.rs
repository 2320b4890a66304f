//! The large-maturity implied variance of the Heston model.
//!
//! Two independent routes are kept side by side:
//!
//! * the *pipeline*: the limiting cumulant `V(p)`, its Legendre transform `V*(x)`
//!   through the explicit maximiser `p*(x)`, and the quadratic-root formula
//!
//!   ```text
//!   sigma_inf^2(x) = 2 (2 V*(x) - x +/- 2 sqrt(V*(x)^2 - x V*(x)))
//!   ```
//!
//!   with the `+` root on `(-theta/2, theta_bar/2)` and the `-` root outside;
//!
//! * the *closed form*
//!
//!   ```text
//!   sigma_inf^2(x) = 2 / (sigma^2 rho_bar^2) (eta - (2 kappa - rho sigma)) (kappa theta + rho sigma x + Delta(x))
//!   ```
//!
//!   which is the SVI omega-form under the Heston-to-SVI map.
//!
//! [`AsymptoticPipeline::verify_equivalence`] measures how far apart they are.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{heston_to_svi_omega, DerivedConstants, HestonParams, SviOmegaParams};

/// Tolerance on the maximum relative deviation for the equivalence check to pass.
pub const EQUIVALENCE_TOL: f64 = 1e-10;

/// Relative size of `Phi = V*^2 - x V*` below which its square root is taken from
/// the factored form. Close to the two boundaries `Phi` is a difference of nearly
/// equal numbers whose absolute error is `~eps * x^2`; its square root would carry
/// an error `~sqrt(eps) * |x|`.
pub const NEAR_BOUNDARY_REL: f64 = 1e-8;

/// Evaluation context for one admissible parameter set.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticPipeline {
    params: HestonParams,
    constants: DerivedConstants,
    kappa_theta: f64,
    /// `sigma^2 rho_bar^2`.
    sigma_sq_rho_bar_sq: f64,
    /// `2 kappa - rho sigma`.
    drift_gap: f64,
}

impl AsymptoticPipeline {
    /// Fails unless every constraint holds; the large correlation regime gets its
    /// own error.
    pub fn new(params: HestonParams) -> Result<Self> {
        params.require_asymptotic()?;
        let constants = DerivedConstants::new(&params)?;
        Ok(Self {
            params,
            constants,
            kappa_theta: params.kappa * params.theta,
            sigma_sq_rho_bar_sq: params.sigma * params.sigma * constants.rho_bar_sq(),
            drift_gap: 2.0 * params.kappa - params.rho * params.sigma,
        })
    }

    pub fn params(&self) -> &HestonParams {
        &self.params
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    /// The SVI parameters this smile coincides with.
    pub fn svi_params(&self) -> SviOmegaParams {
        heston_to_svi_omega(&self.params).expect("validated at construction")
    }

    fn check_moment(&self, p: f64) -> Result<()> {
        let DerivedConstants {
            p_minus, p_plus, ..
        } = self.constants;
        if !(p >= p_minus && p <= p_plus) {
            return Err(Error::Domain(format!(
                "p = {p} outside the moment interval [{p_minus}, {p_plus}]"
            )));
        }
        Ok(())
    }

    fn d_unchecked(&self, p: f64) -> f64 {
        let HestonParams {
            kappa, sigma, rho, ..
        } = self.params;
        let b = kappa - rho * sigma * p;
        (b * b + sigma * sigma * p * (1.0 - p)).max(0.0).sqrt()
    }

    fn v_unchecked(&self, p: f64) -> f64 {
        let HestonParams {
            kappa, sigma, rho, ..
        } = self.params;
        let b = kappa - rho * sigma * p;
        let d = self.d_unchecked(p);
        if b > 0.0 {
            // b - d = -sigma^2 p (1 - p) / (b + d)
            -self.kappa_theta * p * (1.0 - p) / (b + d)
        } else {
            self.kappa_theta / (sigma * sigma) * (b - d)
        }
    }

    /// `d(p) = sqrt((kappa - rho sigma p)^2 + sigma^2 p (1 - p))`, zero at both ends
    /// of the moment interval.
    pub fn d_of_p(&self, p: f64) -> Result<f64> {
        self.check_moment(p)?;
        Ok(self.d_unchecked(p))
    }

    /// Limiting cumulant `V(p) = kappa theta / sigma^2 (kappa - rho sigma p - d(p))`.
    pub fn v_of_p(&self, p: f64) -> Result<f64> {
        self.check_moment(p)?;
        Ok(self.v_unchecked(p))
    }

    /// `Delta(x) = sqrt(sigma^2 x^2 + 2 kappa theta rho sigma x + kappa^2 theta^2)`,
    /// evaluated as the hypotenuse of `(kappa theta + x rho sigma, x sigma rho_bar)`.
    pub fn delta(&self, x: f64) -> f64 {
        let HestonParams { sigma, rho, .. } = self.params;
        (self.kappa_theta + x * rho * sigma).hypot(x * sigma * self.constants.rho_bar)
    }

    /// Maximiser of `p x - V(p)`; increases from `p_minus` to `p_plus`.
    pub fn p_star(&self, x: f64) -> f64 {
        let HestonParams {
            kappa, sigma, rho, ..
        } = self.params;
        let ratio = (self.kappa_theta * rho + x * sigma) / self.delta(x);
        (sigma - 2.0 * kappa * rho + ratio * self.constants.eta)
            / (2.0 * sigma * self.constants.rho_bar_sq())
    }

    /// Legendre transform `V*(x) = p*(x) x - V(p*(x))`.
    pub fn v_star(&self, x: f64) -> f64 {
        let p = self
            .p_star(x)
            .clamp(self.constants.p_minus, self.constants.p_plus);
        p * x - self.v_unchecked(p)
    }

    pub fn a_of_x(&self, x: f64) -> f64 {
        let HestonParams {
            kappa, sigma, rho, ..
        } = self.params;
        x * sigma * sigma - 2.0 * x * kappa * rho * sigma - 2.0 * kappa * self.kappa_theta
            + self.kappa_theta * rho * sigma
    }

    /// Equal to `Delta(x)^2`.
    pub fn b_of_x(&self, x: f64) -> f64 {
        let HestonParams { sigma, rho, .. } = self.params;
        let kt2 = self.kappa_theta * self.kappa_theta;
        2.0 * x * sigma * self.kappa_theta * rho
            + x * x * sigma * sigma
            + kt2 * rho * rho
            + kt2 * self.constants.rho_bar_sq()
    }

    /// `V*(x) = (A(x) + Delta(x) eta) / (2 sigma^2 rho_bar^2)`.
    pub fn v_star_closed(&self, x: f64) -> f64 {
        (self.a_of_x(x) + self.delta(x) * self.constants.eta) / (2.0 * self.sigma_sq_rho_bar_sq)
    }

    /// `Phi(x) = V*(x)^2 - x V*(x)` from the Legendre transform.
    pub fn phi(&self, x: f64) -> f64 {
        let v = self.v_star(x);
        v * (v - x)
    }

    /// Signed root `eta (kappa theta + x rho sigma) - (2 kappa - rho sigma) Delta(x)`,
    /// scaled by `1 / (2 sigma^2 rho_bar^2)`, whose square is `Phi`.
    pub fn phi_root_factored(&self, x: f64) -> f64 {
        let HestonParams { sigma, rho, .. } = self.params;
        (self.constants.eta * (self.kappa_theta + x * rho * sigma) - self.drift_gap * self.delta(x))
            / (2.0 * self.sigma_sq_rho_bar_sq)
    }

    /// `Phi` from its perfect-square factorisation.
    pub fn phi_closed(&self, x: f64) -> f64 {
        self.phi_root_factored(x).powi(2)
    }

    /// `sigma^2 rho_bar^2 (kappa theta + x rho sigma)^2 - x^2 sigma^2 rho_bar^2 (2 kappa - rho sigma)^2`,
    /// whose sign is the sign of the factored root of `Phi`.
    pub fn sign_polynomial(&self, x: f64) -> f64 {
        let HestonParams { sigma, rho, .. } = self.params;
        let u = self.kappa_theta + x * rho * sigma;
        self.sigma_sq_rho_bar_sq * (u * u - x * x * self.drift_gap * self.drift_gap)
    }

    /// `kappa sigma^2 rho_bar^2 (2x + theta)(2 x rho sigma + kappa theta - 2 kappa x)`.
    pub fn sign_polynomial_factored(&self, x: f64) -> f64 {
        let HestonParams {
            kappa,
            theta,
            sigma,
            rho,
            ..
        } = self.params;
        kappa
            * self.sigma_sq_rho_bar_sq
            * (2.0 * x + theta)
            * (2.0 * x * rho * sigma + self.kappa_theta - 2.0 * kappa * x)
    }

    /// `-4 kappa sigma^2 rho_bar^2 (kappa - rho sigma)`, negative for admissible parameters.
    pub fn sign_polynomial_leading(&self) -> f64 {
        let HestonParams {
            kappa, sigma, rho, ..
        } = self.params;
        -4.0 * kappa * self.sigma_sq_rho_bar_sq * (kappa - rho * sigma)
    }

    /// The two roots `(-theta/2, theta_bar/2)` of the sign polynomial. The `+` root
    /// of the quadratic is taken strictly between them.
    pub fn boundaries(&self) -> (f64, f64) {
        (-0.5 * self.params.theta, 0.5 * self.constants.theta_bar)
    }

    /// Both roots `2 (2 V* - x +- 2 sqrt(Phi))` of the quadratic satisfied by the
    /// implied variance, as `(plus, minus)`. They coincide where `Phi` vanishes.
    pub fn variance_branches(&self, x: f64) -> (f64, f64) {
        let v = self.v_star(x);
        let phi = v * (v - x);
        let scale = v.abs().max(x.abs()).max(self.params.theta);
        let root = if phi < NEAR_BOUNDARY_REL * scale * scale {
            self.phi_root_factored(x).abs()
        } else {
            phi.sqrt()
        };
        let plus = 2.0 * (2.0 * v - x + 2.0 * root);
        // The two roots multiply to 4 x^2; dividing avoids the cancellation in
        // 2 V* - x - 2 sqrt(Phi).
        (plus, 4.0 * x * x / plus)
    }

    /// Large-maturity implied variance through `V*` and the branch indicator.
    pub fn variance_pipeline(&self, x: f64) -> f64 {
        let (plus, minus) = self.variance_branches(x);
        let (lo, hi) = self.boundaries();
        if x > lo && x < hi {
            plus
        } else {
            minus
        }
    }

    /// Large-maturity implied variance in closed form.
    pub fn variance_closed(&self, x: f64) -> f64 {
        let HestonParams { sigma, rho, .. } = self.params;
        // (eta - g) / (sigma^2 rho_bar^2) = 1 / (eta + g), g = 2 kappa - rho sigma
        let level = if self.drift_gap >= 0.0 {
            2.0 / (self.constants.eta + self.drift_gap)
        } else {
            2.0 * (self.constants.eta - self.drift_gap) / self.sigma_sq_rho_bar_sq
        };
        let u = self.kappa_theta + rho * sigma * x;
        let delta = self.delta(x);
        // u + Delta with Delta^2 - u^2 = x^2 sigma^2 rho_bar^2
        let shape = if u >= 0.0 {
            u + delta
        } else {
            x * x * self.sigma_sq_rho_bar_sq / (delta - u)
        };
        level * shape
    }

    /// Compares the pipeline, the closed form and the SVI omega-form on `grid`.
    pub fn verify_equivalence(&self, grid: &[f64]) -> EquivalenceReport {
        let svi = self.svi_params();
        let points: Vec<EquivalencePoint> = grid
            .iter()
            .map(|&x| {
                let pipeline = self.variance_pipeline(x);
                let closed = self.variance_closed(x);
                let svi_value = svi.variance(x);
                let pairs = [
                    (pipeline, closed),
                    (pipeline, svi_value),
                    (closed, svi_value),
                ];
                let abs_deviation = pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let rel_deviation = pairs
                    .iter()
                    .map(|&(a, b)| relative_deviation(a, b))
                    .fold(0.0, f64::max);
                EquivalencePoint {
                    x,
                    pipeline,
                    closed,
                    svi: svi_value,
                    abs_deviation,
                    rel_deviation,
                }
            })
            .collect();
        let max_abs_deviation = points.iter().map(|p| p.abs_deviation).fold(0.0, f64::max);
        let max_rel_deviation = points.iter().map(|p| p.rel_deviation).fold(0.0, f64::max);
        let finite = points
            .iter()
            .all(|p| p.pipeline.is_finite() && p.closed.is_finite() && p.svi.is_finite());
        EquivalenceReport {
            passed: finite && !grid.is_empty() && max_rel_deviation <= EQUIVALENCE_TOL,
            max_abs_deviation,
            max_rel_deviation,
            points,
        }
    }
}

pub(crate) fn relative_deviation(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalencePoint {
    pub x: f64,
    pub pipeline: f64,
    pub closed: f64,
    pub svi: f64,
    pub abs_deviation: f64,
    pub rel_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub passed: bool,
    pub max_abs_deviation: f64,
    pub max_rel_deviation: f64,
    pub points: Vec<EquivalencePoint>,
}

/// `n` evenly spaced points on `[lo, hi]`; a single point sits at `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let span = hi - lo;
            let last = (n - 1) as f64;
            (0..n).map(|i| lo + span * (i as f64) / last).collect()
        }
    }
}
