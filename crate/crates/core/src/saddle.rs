//! The exponent-matching condition behind the SVI/Heston correspondence.
//!
//! For large maturities the Heston characteristic function behaves like
//! `phi_T(u - i/2) ~ exp(-psi(u) T)` with `psi(u) = -V(1/2 + i u)`, where `V` is
//! the limiting cumulant continued to complex arguments. The saddle point of
//! the Fourier pricing integral at log-strike `k = x T` solves
//! `psi'(u) = -i x`, and matching exponents on both sides gives
//!
//! ```text
//! v / 8 + x^2 / (2 v) = psi(u~(x)) + i x u~(x)
//! ```
//!
//! which SVI satisfies exactly under the Heston-to-SVI map.

use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotic::{relative_deviation, AsymptoticPipeline};
use crate::error::Result;
use crate::params::{DerivedConstants, HestonParams, SviOmegaParams};

/// Relative tolerance on the exponent-matching residual.
pub const SADDLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct SaddleContext {
    pipeline: AsymptoticPipeline,
    svi: SviOmegaParams,
}

impl SaddleContext {
    pub fn new(params: HestonParams) -> Result<Self> {
        let pipeline = AsymptoticPipeline::new(params)?;
        Ok(Self {
            svi: pipeline.svi_params(),
            pipeline,
        })
    }

    pub fn params(&self) -> &HestonParams {
        self.pipeline.params()
    }

    pub fn constants(&self) -> &DerivedConstants {
        self.pipeline.constants()
    }

    pub fn pipeline(&self) -> &AsymptoticPipeline {
        &self.pipeline
    }

    /// `V(p)` for complex `p`, with `d(p)` on the principal branch of the square root.
    pub fn v_complex(&self, p: Complex64) -> Complex64 {
        let HestonParams {
            kappa,
            theta,
            sigma,
            rho,
            ..
        } = *self.params();
        let one = Complex64::new(1.0, 0.0);
        let b = kappa - rho * sigma * p;
        let d = (b * b + sigma * sigma * p * (one - p)).sqrt();
        if b.re > 0.0 {
            -kappa * theta * p * (one - p) / (b + d)
        } else {
            kappa * theta / (sigma * sigma) * (b - d)
        }
    }

    /// Large-maturity decay rate `psi(u) = -V(1/2 + i u)`.
    pub fn psi(&self, u: Complex64) -> Complex64 {
        -self.v_complex(Complex64::new(0.5, 0.0) + Complex64::i() * u)
    }

    /// Central difference of `psi` with step `1e-6 (p_plus - p_minus)`.
    pub fn psi_prime(&self, u: Complex64) -> Complex64 {
        let c = self.constants();
        let h = 1e-6 * (c.p_plus - c.p_minus);
        (self.psi(u + h) - self.psi(u - h)) / (2.0 * h)
    }

    /// Saddle point `u~(x) = -i (p*(x) - 1/2)`, purely imaginary.
    pub fn u_tilde(&self, x: f64) -> Complex64 {
        Complex64::new(0.0, 0.5 - self.pipeline.p_star(x))
    }

    /// `|psi'(u~(x)) + i x|`.
    pub fn saddle_equation_residual(&self, x: f64) -> f64 {
        (self.psi_prime(self.u_tilde(x)) + Complex64::new(0.0, x)).norm()
    }

    /// `psi(u~(x)) + i x u~(x)`.
    pub fn exponent(&self, x: f64) -> Complex64 {
        let u = self.u_tilde(x);
        self.psi(u) + Complex64::new(0.0, x) * u
    }

    /// Residual of the exponent-matching condition with `v` the SVI variance.
    pub fn saddle_residual(&self, x: f64) -> SaddleResidual {
        let variance = self.svi.variance(x);
        let lhs = variance / 8.0 + x * x / (2.0 * variance);
        let rhs = self.exponent(x);
        let legendre = self.pipeline.v_star_closed(x) - 0.5 * x;
        let abs = (Complex64::new(lhs, 0.0) - rhs).norm();
        SaddleResidual {
            x,
            variance,
            lhs,
            rhs_re: rhs.re,
            rhs_im: rhs.im,
            abs,
            rel: abs / lhs.abs().max(rhs.norm()),
            legendre_gap: (rhs - legendre).norm(),
            legendre_rel: relative_deviation(rhs.re, legendre).max(rhs.im.abs() / legendre.abs()),
        }
    }

    pub fn check(&self, grid: &[f64]) -> SaddleReport {
        let points: Vec<SaddleResidual> = grid.iter().map(|&x| self.saddle_residual(x)).collect();
        let max_rel = points.iter().map(|p| p.rel).fold(0.0, f64::max);
        let max_legendre_gap = points.iter().map(|p| p.legendre_gap).fold(0.0, f64::max);
        let max_equation_residual = grid
            .iter()
            .map(|&x| self.saddle_equation_residual(x))
            .fold(0.0, f64::max);
        SaddleReport {
            passed: !grid.is_empty() && points.iter().all(|p| p.rel <= SADDLE_TOL),
            max_rel_residual: max_rel,
            max_legendre_gap,
            max_equation_residual,
            u_tilde_atm: self.u_tilde(0.0).im,
            points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleResidual {
    pub x: f64,
    /// SVI variance used as `v`.
    pub variance: f64,
    /// `v / 8 + x^2 / (2 v)`.
    pub lhs: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub abs: f64,
    pub rel: f64,
    /// `|psi(u~) + i x u~ - (V*(x) - x/2)|` with `V*` from its closed form.
    pub legendre_gap: f64,
    pub legendre_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleReport {
    pub passed: bool,
    pub max_rel_residual: f64,
    pub max_legendre_gap: f64,
    pub max_equation_residual: f64,
    /// Imaginary part of `u~(0)`.
    pub u_tilde_atm: f64,
    pub points: Vec<SaddleResidual>,
}
