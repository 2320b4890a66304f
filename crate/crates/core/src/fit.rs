//! Least-squares calibration of a raw SVI slice to a smile, and the reading of
//! the fitted parameters in terms of the large-maturity Heston smile.
//!
//! The fit minimises `sum_i (T var_svi(k_i) - T vol_i^2)^2` with Levenberg-Marquardt
//! on the unconstrained coordinates `(a, log b, atanh rho_tilde, m, log sigma_tilde)`,
//! started from a fixed grid of seeds.

use nalgebra::{Matrix5, Vector5};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{svi_raw_to_omega_unchecked, SviOmegaParams, SviRawParams};
use crate::pricing::smile::Smile;
use crate::svi::{SmileDiagnostics, WingSlopes};

/// Stationarity: `|J^T r|_inf <= GRADIENT_TOL (1 + objective)`.
pub const GRADIENT_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 500;
const SEED_ORIENTATIONS: [f64; 3] = [-0.7, 0.0, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SviRawParams,
    /// Root-mean-square error in total variance.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|J^T r|_inf` at the returned parameters, in the unconstrained coordinates.
    pub gradient_norm: f64,
    /// Present when the fit converged.
    pub interpretation: Option<FitInterpretation>,
    /// Sum of squared residuals after each accepted step of the winning start.
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// What a raw SVI slice says about the Heston smile it would be the limit of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitInterpretation {
    /// `rho_tilde`, read as the spot-vol correlation.
    pub correlation: f64,
    /// Implied variance at `k = 0`.
    pub atm_variance: f64,
    /// Log-strike of the variance minimum, `m - rho_tilde sigma_tilde / sqrt(1 - rho_tilde^2)`.
    pub min_location_k: f64,
    /// Variance slopes in `k`, `b (1 +- rho_tilde)`.
    pub wing_slopes: WingSlopes,
    /// Omega-form of the slice, absent when `a <= 0`.
    pub omega: Option<SviOmegaParams>,
    /// Omega-form diagnostics, including the minimum `-2 rho / omega2` in `x`.
    pub diagnostics: Option<SmileDiagnostics>,
    /// `b / (omega1 omega2 / (2T)) - 1`.
    pub consistency_residual: Option<f64>,
}

pub fn interpret_raw(r: &SviRawParams) -> Result<FitInterpretation> {
    r.check()?;
    let conv = svi_raw_to_omega_unchecked(r).ok();
    Ok(FitInterpretation {
        correlation: r.rho_tilde,
        atm_variance: r.variance(0.0),
        min_location_k: r.minimum_location(),
        wing_slopes: r.wing_slopes(),
        omega: conv.map(|c| c.omega),
        diagnostics: conv.map(|c| c.omega.diagnostics()),
        consistency_residual: conv.map(|c| c.residual),
    })
}

/// Interpretation report of a converged fit.
pub fn interpret_fit(r: &FitResult) -> Result<FitInterpretation> {
    if !r.converged {
        return Err(Error::NotConverged(format!(
            "refusing to interpret: gradient norm {:e} after {} iterations, objective {:e}",
            r.gradient_norm, r.iterations, r.objective
        )));
    }
    interpret_raw(&r.params)
}

type Coords = Vector5<f64>;

fn to_coords(r: &SviRawParams) -> Coords {
    Vector5::new(r.a, r.b.ln(), r.rho_tilde.atanh(), r.m, r.sigma_tilde.ln())
}

fn from_coords(c: &Coords, maturity: f64) -> SviRawParams {
    SviRawParams {
        a: c[0],
        b: c[1].exp(),
        rho_tilde: c[2].tanh(),
        m: c[3],
        sigma_tilde: c[4].exp(),
        maturity,
    }
}

struct Problem<'a> {
    ks: &'a [f64],
    targets: Vec<f64>,
    maturity: f64,
}

impl Problem<'_> {
    fn residuals(&self, r: &SviRawParams) -> Vec<f64> {
        self.ks
            .iter()
            .zip(&self.targets)
            .map(|(&k, &w)| r.total_variance(k) - w)
            .collect()
    }

    fn cost(&self, r: &SviRawParams) -> f64 {
        let c: f64 = self.residuals(r).iter().map(|e| e * e).sum();
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }

    /// `J^T J`, `J^T r` and the residuals, with `J` taken in the unconstrained
    /// coordinates.
    fn normal_equations(&self, r: &SviRawParams) -> (Matrix5<f64>, Vector5<f64>, f64) {
        let t = self.maturity;
        let rb_sq = 1.0 - r.rho_tilde * r.rho_tilde;
        let mut jtj = Matrix5::zeros();
        let mut jtr = Vector5::zeros();
        let mut cost = 0.0;
        for (&k, &w) in self.ks.iter().zip(&self.targets) {
            let q = k - r.m;
            let root = (q * q + r.sigma_tilde * r.sigma_tilde).sqrt();
            let tb = t * r.b;
            let row = Vector5::new(
                t,
                tb * (r.rho_tilde * q + root),
                tb * q * rb_sq,
                -tb * (r.rho_tilde + q / root),
                tb * r.sigma_tilde * r.sigma_tilde / root,
            );
            let e = r.total_variance(k) - w;
            jtj += row * row.transpose();
            jtr += row * e;
            cost += e * e;
        }
        (jtj, jtr, cost)
    }

    fn seed(&self, rho_tilde: f64, m: f64) -> Option<SviRawParams> {
        let lo = self.ks[0];
        let hi = self.ks[self.ks.len() - 1];
        let sigma_tilde = (0.1 * (hi - lo)).max(1e-3);
        // With (rho_tilde, m, sigma_tilde) fixed, total variance is linear in (a, b).
        let f: Vec<f64> = self
            .ks
            .iter()
            .map(|&k| {
                let q = k - m;
                rho_tilde * q + (q * q + sigma_tilde * sigma_tilde).sqrt()
            })
            .collect();
        let n = f.len() as f64;
        let t = self.maturity;
        let (sf, sw) = (f.iter().sum::<f64>(), self.targets.iter().sum::<f64>());
        let sff: f64 = f.iter().map(|v| v * v).sum();
        let sfw: f64 = f.iter().zip(&self.targets).map(|(a, b)| a * b).sum();
        let det = n * sff - sf * sf;
        let mean_var = sw / (n * t);
        let (mut a, mut b) = if det.abs() > 1e-300 {
            (
                (sff * sw - sf * sfw) / det / t,
                (n * sfw - sf * sw) / det / t,
            )
        } else {
            (mean_var, 0.0)
        };
        if !(b > 0.0) {
            b = 1e-3 * mean_var.abs().max(1e-8);
            a = mean_var - b * sf / n;
        }
        let r = SviRawParams {
            a,
            b,
            rho_tilde,
            m,
            sigma_tilde,
            maturity: t,
        };
        (r.a.is_finite() && r.b.is_finite()).then_some(r)
    }

    /// Levenberg-Marquardt with Marquardt's diagonal scaling. Only steps that lower
    /// the cost are accepted.
    fn solve(&self, start: &SviRawParams) -> Run {
        let t = self.maturity;
        let mut x = to_coords(start);
        let mut params = from_coords(&x, t);
        let (mut jtj, mut jtr, mut cost) = self.normal_equations(&params);
        let mut lambda = 1e-3;
        let mut history = vec![cost];
        let mut iterations = 0;
        let mut converged = false;
        while iterations < MAX_ITERATIONS {
            let objective = (cost / self.ks.len() as f64).sqrt();
            if jtr.amax() <= GRADIENT_TOL * (1.0 + objective) {
                converged = true;
                break;
            }
            iterations += 1;
            let mut accepted = false;
            while lambda < 1e20 {
                let mut lhs = jtj;
                for i in 0..5 {
                    lhs[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
                }
                let Some(step) = lhs.lu().solve(&(-jtr)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial_x = x + step;
                let trial = from_coords(&trial_x, t);
                let trial_cost = self.cost(&trial);
                if trial_cost < cost {
                    x = trial_x;
                    params = trial;
                    (jtj, jtr, cost) = self.normal_equations(&params);
                    history.push(cost);
                    lambda = (lambda / 10.0).max(1e-15);
                    accepted = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted {
                // No descent direction resolvable in double precision.
                break;
            }
        }
        Run {
            params,
            cost,
            gradient_norm: jtr.amax(),
            iterations,
            converged,
            history,
        }
    }
}

struct Run {
    params: SviRawParams,
    cost: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Fits raw SVI to `smile`. Starts from `initial` when given, then from each seed
/// of the grid `rho_tilde in {-0.7, 0, 0.7}` x `m in {min k, mid k, max k}`; the
/// lowest objective wins, ties going to the earlier start.
pub fn fit_svi(smile: &Smile, initial: Option<&SviRawParams>) -> Result<FitResult> {
    if smile.len() < 5 {
        return Err(Error::Underdetermined {
            points: smile.len(),
        });
    }
    let ks = smile.log_moneyness();
    let problem = Problem {
        ks: &ks,
        targets: smile.total_variances(),
        maturity: smile.maturity,
    };
    let mut starts = Vec::new();
    if let Some(init) = initial {
        init.check()?;
        starts.push(SviRawParams {
            maturity: smile.maturity,
            ..*init
        });
    }
    let (lo, hi) = (ks[0], ks[ks.len() - 1]);
    for rho in SEED_ORIENTATIONS {
        for m in [lo, 0.5 * (lo + hi), hi] {
            starts.extend(problem.seed(rho, m));
        }
    }
    let runs: Vec<Run> = starts.par_iter().map(|s| problem.solve(s)).collect();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.cost < best.cost { r } else { best })
        .expect("at least one start");
    let interpretation = if best.converged {
        Some(interpret_raw(&best.params)?)
    } else {
        None
    };
    Ok(FitResult {
        params: best.params,
        objective: (best.cost / ks.len() as f64).sqrt(),
        iterations: best.iterations,
        converged: best.converged,
        gradient_norm: best.gradient_norm,
        interpretation,
        history: best.history,
    })
}
