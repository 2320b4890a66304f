//! Finite-maturity implied variance against the large-maturity SVI smile.

use serde::Serialize;

use super::fourier::QuadratureConfig;
use super::smile::{heston_smile, SmileFailure};
use crate::error::{Error, Result};
use crate::params::{heston_to_svi_omega, HestonParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "T")]
    pub maturity: f64,
    /// `max_x |vol^2(xT, T) - svi(x)| / svi(x)`.
    pub max_rel_error: f64,
    /// Grid point where the maximum is attained.
    pub worst_x: f64,
    pub failures: Vec<SmileFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub strictly_decreasing: bool,
    /// `error(T_first) / error(T_last)`.
    pub improvement: f64,
}

/// Relative distance between Heston implied variance at `k = x T` and the SVI
/// variance at `x`, for each maturity of `maturities` (strictly increasing).
///
/// Points that fail to price are reported per row and make the study an error,
/// since the maximum would otherwise be taken over a different grid.
pub fn convergence_study(
    p: &HestonParams,
    maturities: &[f64],
    x_grid: &[f64],
    q: &QuadratureConfig,
) -> Result<ConvergenceReport> {
    let svi = heston_to_svi_omega(p)?;
    if maturities.is_empty() || x_grid.is_empty() {
        return Err(Error::MalformedInput(
            "need at least one maturity and one grid point".into(),
        ));
    }
    if maturities.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::MalformedInput(
            "maturities must be strictly increasing".into(),
        ));
    }
    let mut rows = Vec::with_capacity(maturities.len());
    for &t in maturities {
        let report = heston_smile(p, t, x_grid, q)?;
        if let Some(f) = report.failures.first() {
            return Err(Error::Domain(format!(
                "pricing failed at T = {t}, x = {}: {}",
                f.x, f.error
            )));
        }
        let (mut worst, mut worst_x) = (0.0, x_grid[0]);
        for pt in &report.smile.points {
            let x = pt.k / t;
            let target = svi.variance(x);
            let err = (pt.vol * pt.vol - target).abs() / target;
            if err > worst {
                worst = err;
                worst_x = x;
            }
        }
        rows.push(ConvergenceRow {
            maturity: t,
            max_rel_error: worst,
            worst_x,
            failures: report.failures,
        });
    }
    let strictly_decreasing = rows
        .windows(2)
        .all(|w| w[1].max_rel_error < w[0].max_rel_error);
    let improvement = rows[0].max_rel_error / rows[rows.len() - 1].max_rel_error;
    Ok(ConvergenceReport {
        rows,
        strictly_decreasing,
        improvement,
    })
}
