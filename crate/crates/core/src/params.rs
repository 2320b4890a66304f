//! Parameter records for the Heston model and the two SVI forms, the standing
//! constraints on Heston parameters, and the maps between the records.
//!
//! The omega-form of SVI lives in scaled log-moneyness `x = k / T`:
//!
//! ```text
//! sigma^2(x) = (omega1 / 2) * (1 + omega2 * rho * x + sqrt((omega2 * x + rho)^2 + 1 - rho^2))
//! ```
//!
//! and the raw form in log-strike `k` at a fixed maturity `T`:
//!
//! ```text
//! sigma^2(k) = a + b * (rho_tilde * (k - m) + sqrt((k - m)^2 + sigma_tilde^2))
//! ```
//!
//! All parameters are annualized.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on `b = omega1 * omega2 / (2T)` when inverting raw SVI.
pub const HESTON_CONSISTENCY_TOL: f64 = 1e-9;

/// Heston parameters under zero rates and unit spot.
///
/// The record itself is unchecked so that invalid inputs can be reported rather
/// than rejected on sight; see [`validate_heston`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    /// Mean-reversion speed of the variance.
    pub kappa: f64,
    /// Long-run variance.
    pub theta: f64,
    /// Volatility of variance.
    pub sigma: f64,
    /// Spot/variance correlation.
    pub rho: f64,
    /// Initial variance.
    pub v0: f64,
}

/// A single violated constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    NonPositive {
        name: &'static str,
        value: f64,
    },
    CorrelationOutOfRange {
        rho: f64,
    },
    /// `2 kappa theta < sigma^2`.
    Feller {
        twice_kappa_theta: f64,
        sigma_sq: f64,
    },
    /// `kappa - rho sigma <= 0`.
    LargeCorrelationRegime {
        gap: f64,
    },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::NonPositive { .. } => "positivity",
            Violation::CorrelationOutOfRange { .. } => "correlation range",
            Violation::Feller { .. } => "feller",
            Violation::LargeCorrelationRegime { .. } => "large correlation regime",
        }
    }

    /// Violations that make the record meaningless for every computation, as opposed
    /// to the two modelling assumptions.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Violation::NonPositive { .. } | Violation::CorrelationOutOfRange { .. }
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NonPositive { name, value } => {
                write!(f, "positivity: {name} = {value} must be > 0")
            }
            Violation::CorrelationOutOfRange { rho } => {
                write!(f, "correlation range: rho = {rho} must lie in (-1, 1)")
            }
            Violation::Feller {
                twice_kappa_theta,
                sigma_sq,
            } => write!(
                f,
                "feller: 2*kappa*theta = {twice_kappa_theta} < sigma^2 = {sigma_sq}"
            ),
            Violation::LargeCorrelationRegime { gap } => write!(
                f,
                "large correlation regime: kappa - rho*sigma = {gap} must be > 0"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.violations.iter().map(Violation::name).collect()
    }

    pub fn has_structural(&self) -> bool {
        self.violations.iter().any(Violation::is_structural)
    }

    pub fn large_correlation_gap(&self) -> Option<f64> {
        self.violations.iter().find_map(|v| match v {
            Violation::LargeCorrelationRegime { gap } => Some(*gap),
            _ => None,
        })
    }

    pub fn violates_feller(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::Feller { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "all constraints hold");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every constraint on `p` and lists the ones that fail.
///
/// Only non-finite fields are an error; any finite record yields a report.
pub fn validate_heston(p: &HestonParams) -> Result<ValidationReport> {
    let fields = [
        ("kappa", p.kappa),
        ("theta", p.theta),
        ("sigma", p.sigma),
        ("rho", p.rho),
        ("v0", p.v0),
    ];
    if let Some((name, value)) = fields.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::MalformedInput(format!(
            "{name} = {value} is not finite"
        )));
    }

    let mut violations = Vec::new();
    for (name, value) in [
        ("kappa", p.kappa),
        ("theta", p.theta),
        ("sigma", p.sigma),
        ("v0", p.v0),
    ] {
        if value <= 0.0 {
            violations.push(Violation::NonPositive { name, value });
        }
    }
    if p.rho <= -1.0 || p.rho >= 1.0 {
        violations.push(Violation::CorrelationOutOfRange { rho: p.rho });
    }
    let twice_kappa_theta = 2.0 * p.kappa * p.theta;
    let sigma_sq = p.sigma * p.sigma;
    if twice_kappa_theta < sigma_sq {
        violations.push(Violation::Feller {
            twice_kappa_theta,
            sigma_sq,
        });
    }
    let gap = p.kappa - p.rho * p.sigma;
    if gap <= 0.0 {
        violations.push(Violation::LargeCorrelationRegime { gap });
    }
    Ok(ValidationReport { violations })
}

impl HestonParams {
    pub const fn new(kappa: f64, theta: f64, sigma: f64, rho: f64, v0: f64) -> Self {
        Self {
            kappa,
            theta,
            sigma,
            rho,
            v0,
        }
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        validate_heston(self)
    }

    /// Accepts any record usable by the finite-maturity pricer: positive fields and
    /// `|rho| < 1`. Feller and the correlation assumption are not required there.
    pub fn require_structural(&self) -> Result<ValidationReport> {
        let report = validate_heston(self)?;
        if report.has_structural() {
            return Err(Error::InvalidParameters(report));
        }
        Ok(report)
    }

    /// Accepts only records for which the large-maturity smile is defined: every
    /// constraint, Feller included, must hold.
    pub fn require_asymptotic(&self) -> Result<()> {
        let report = validate_heston(self)?;
        if report.has_structural() {
            return Err(Error::InvalidParameters(report));
        }
        if let Some(gap) = report.large_correlation_gap() {
            return Err(Error::LargeCorrelationRegime { gap });
        }
        if !report.is_ok() {
            return Err(Error::InvalidParameters(report));
        }
        Ok(())
    }

    pub fn feller_holds(&self) -> bool {
        2.0 * self.kappa * self.theta >= self.sigma * self.sigma
    }
}

/// Constants of the large-maturity analysis that depend only on the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `sqrt(4 kappa^2 + sigma^2 - 4 kappa rho sigma)`.
    pub eta: f64,
    /// `sqrt(1 - rho^2)`.
    pub rho_bar: f64,
    /// `kappa theta / (kappa - rho sigma)`.
    pub theta_bar: f64,
    /// Lower end of the interval of moments finite for every maturity.
    pub p_minus: f64,
    /// Upper end of the same interval.
    pub p_plus: f64,
}

impl DerivedConstants {
    /// Needs only structural validity. `theta_bar` is meaningful only when
    /// `kappa - rho sigma > 0`.
    pub fn new(p: &HestonParams) -> Result<Self> {
        p.require_structural()?;
        let HestonParams {
            kappa, sigma, rho, ..
        } = *p;
        let rho_bar_sq = 1.0 - rho * rho;
        let eta = (4.0 * kappa * kappa + sigma * sigma - 4.0 * kappa * rho * sigma).sqrt();
        // p_minus and p_plus are the roots of
        //   -sigma^2 rho_bar^2 p^2 + (sigma^2 - 2 kappa rho sigma) p + kappa^2,
        // whose product is -kappa^2 / (sigma^2 rho_bar^2). The root that does not
        // cancel is computed directly and the other from the product.
        let lin = sigma - 2.0 * kappa * rho;
        let denom = 2.0 * sigma * rho_bar_sq;
        let product = -kappa * kappa / (sigma * sigma * rho_bar_sq);
        let (p_minus, p_plus) = if lin >= 0.0 {
            let p_plus = (lin + eta) / denom;
            (product / p_plus, p_plus)
        } else {
            let p_minus = (lin - eta) / denom;
            (p_minus, product / p_minus)
        };
        Ok(Self {
            eta,
            rho_bar: rho_bar_sq.sqrt(),
            theta_bar: kappa * p.theta / (kappa - rho * sigma),
            p_minus,
            p_plus,
        })
    }

    pub fn rho_bar_sq(&self) -> f64 {
        self.rho_bar * self.rho_bar
    }
}

/// Derived constants for a parameter set that satisfies every constraint.
pub fn derive_constants(p: &HestonParams) -> Result<DerivedConstants> {
    p.require_asymptotic()?;
    DerivedConstants::new(p)
}

/// The omega-form of SVI in scaled log-moneyness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviOmegaParams {
    /// At-the-money implied variance.
    pub omega1: f64,
    /// Curvature scale.
    pub omega2: f64,
    pub rho: f64,
}

impl SviOmegaParams {
    pub fn new(omega1: f64, omega2: f64, rho: f64) -> Result<Self> {
        let s = Self {
            omega1,
            omega2,
            rho,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.omega1.is_finite() && self.omega1 > 0.0) {
            return Err(Error::Domain(format!(
                "omega1 = {} must be > 0",
                self.omega1
            )));
        }
        if !(self.omega2.is_finite() && self.omega2 > 0.0) {
            return Err(Error::Domain(format!(
                "omega2 = {} must be > 0",
                self.omega2
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "rho = {} must lie in (-1, 1)",
                self.rho
            )));
        }
        Ok(())
    }
}

/// The classic five-parameter SVI slice at maturity `maturity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviRawParams {
    pub a: f64,
    pub b: f64,
    pub rho_tilde: f64,
    pub m: f64,
    pub sigma_tilde: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
}

impl SviRawParams {
    pub fn check(&self) -> Result<()> {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("rho_tilde", self.rho_tilde),
            ("m", self.m),
            ("sigma_tilde", self.sigma_tilde),
            ("T", self.maturity),
        ];
        if let Some((name, value)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::MalformedInput(format!(
                "{name} = {value} is not finite"
            )));
        }
        if self.b < 0.0 {
            return Err(Error::Domain(format!("b = {} must be >= 0", self.b)));
        }
        if self.sigma_tilde <= 0.0 {
            return Err(Error::Domain(format!(
                "sigma_tilde = {} must be > 0",
                self.sigma_tilde
            )));
        }
        if self.rho_tilde.abs() >= 1.0 {
            return Err(Error::Domain(format!(
                "rho_tilde = {} must lie in (-1, 1)",
                self.rho_tilde
            )));
        }
        if self.maturity <= 0.0 {
            return Err(Error::Domain(format!("T = {} must be > 0", self.maturity)));
        }
        let floor =
            self.a + self.b * self.sigma_tilde * (1.0 - self.rho_tilde * self.rho_tilde).sqrt();
        if floor < 0.0 {
            return Err(Error::Domain(format!(
                "minimum variance a + b*sigma_tilde*sqrt(1-rho_tilde^2) = {floor} is negative"
            )));
        }
        Ok(())
    }
}

/// The SVI omega-parameters that reproduce the large-maturity Heston smile.
pub fn heston_to_svi_omega(p: &HestonParams) -> Result<SviOmegaParams> {
    p.require_asymptotic()?;
    let c = DerivedConstants::new(p)?;
    let kappa_theta = p.kappa * p.theta;
    let drift_gap = 2.0 * p.kappa - p.rho * p.sigma;
    // (eta - g)(eta + g) = sigma^2 rho_bar^2 with g = 2 kappa - rho sigma; pick the
    // representation without cancellation.
    let omega1 = if drift_gap >= 0.0 {
        4.0 * kappa_theta / (c.eta + drift_gap)
    } else {
        4.0 * kappa_theta * (c.eta - drift_gap) / (p.sigma * p.sigma * c.rho_bar_sq())
    };
    SviOmegaParams::new(omega1, p.sigma / kappa_theta, p.rho)
}

pub fn svi_omega_to_raw(s: &SviOmegaParams, maturity: f64) -> Result<SviRawParams> {
    s.check()?;
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::Domain(format!("T = {maturity} must be > 0")));
    }
    let rho_bar_sq = 1.0 - s.rho * s.rho;
    Ok(SviRawParams {
        a: 0.5 * s.omega1 * rho_bar_sq,
        b: s.omega1 * s.omega2 / (2.0 * maturity),
        rho_tilde: s.rho,
        m: -s.rho * maturity / s.omega2,
        sigma_tilde: rho_bar_sq.sqrt() * maturity / s.omega2,
        maturity,
    })
}

/// Raw-to-omega conversion together with the relative Heston-consistency residual
/// `b / (omega1 omega2 / (2T)) - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawConversion {
    pub omega: SviOmegaParams,
    pub residual: f64,
}

/// Converts without enforcing consistency; fails only when no omega-form exists
/// (`a <= 0` gives a non-positive `omega1`).
pub fn svi_raw_to_omega_unchecked(r: &SviRawParams) -> Result<RawConversion> {
    r.check()?;
    let rho_bar_sq = 1.0 - r.rho_tilde * r.rho_tilde;
    let omega = SviOmegaParams::new(
        2.0 * r.a / rho_bar_sq,
        rho_bar_sq.sqrt() * r.maturity / r.sigma_tilde,
        r.rho_tilde,
    )?;
    let implied_b = omega.omega1 * omega.omega2 / (2.0 * r.maturity);
    Ok(RawConversion {
        omega,
        residual: r.b / implied_b - 1.0,
    })
}

/// Inverse of [`svi_omega_to_raw`]; rejects raw slices off the Heston-consistent
/// manifold.
pub fn svi_raw_to_omega(r: &SviRawParams) -> Result<SviOmegaParams> {
    let conv = svi_raw_to_omega_unchecked(r)?;
    if conv.residual.abs() > HESTON_CONSISTENCY_TOL {
        return Err(Error::Inconsistent {
            residual: conv.residual,
        });
    }
    Ok(conv.omega)
}
