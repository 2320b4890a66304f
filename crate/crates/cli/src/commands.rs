use std::fmt::Write as _;
use std::io::BufReader;

use serde_json::{json, Value};

use heston_svi::fit::fit_svi;
use heston_svi::pricing::smile::fmt17;
use heston_svi::pricing::{convergence_study, heston_smile, QuadratureConfig, Smile};
use heston_svi::saddle::{SaddleContext, SADDLE_TOL};
use heston_svi::sampling::random_admissible_params;
use heston_svi::{
    derive_constants, heston_to_svi_omega, svi_omega_to_raw, AsymptoticPipeline, HestonParams,
    EQUIVALENCE_TOL,
};

use crate::args::{Command, Flags, Form};
use crate::{Failure, Output};

pub fn dispatch(command: Command, flags: &Flags) -> Result<Output, Failure> {
    match command {
        Command::Asymptote => asymptote(flags),
        Command::Verify => verify(flags),
        Command::SaddleCheck => saddle_check(flags),
        Command::Smile => smile(flags),
        Command::Converge => converge(flags),
        Command::Fit => fit(flags),
        Command::MapParams => map_params(flags),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise")
}

fn quadrature(flags: &Flags) -> Result<QuadratureConfig, Failure> {
    let q = QuadratureConfig {
        abs_tolerance: flags
            .tol
            .unwrap_or(QuadratureConfig::default().abs_tolerance),
        ..Default::default()
    };
    q.check()?;
    Ok(q)
}

fn threshold(flags: &Flags, default: f64) -> Result<f64, Failure> {
    let tol = flags.tol.unwrap_or(default);
    if tol.is_finite() && tol > 0.0 {
        Ok(tol)
    } else {
        Err(Failure::input(format!("--tol {tol} must be positive")))
    }
}

/// The explicit parameter set followed by `--count` random sets when `--seed` is given.
fn parameter_sets(flags: &Flags) -> Result<Vec<HestonParams>, Failure> {
    let mut sets: Vec<HestonParams> = flags.heston()?.into_iter().collect();
    if let Some(seed) = flags.seed {
        sets.extend(random_admissible_params(seed, flags.count.unwrap_or(100)));
    }
    if sets.is_empty() {
        return Err(Failure::input(
            "give --kappa --theta --sigma --rho --v0, or --seed for random parameter sets",
        ));
    }
    Ok(sets)
}

fn asymptote(flags: &Flags) -> Result<Output, Failure> {
    let p = flags.require_heston()?;
    let pipe = AsymptoticPipeline::new(p)?;
    let grid = flags.grid(-10.0 * p.theta, 10.0 * p.theta, 101)?;
    let form = flags.form.unwrap_or(Form::Pipeline);
    let mut out = String::new();
    writeln!(
        out,
        "# form={}",
        match form {
            Form::Pipeline => "pipeline",
            Form::Closed => "closed",
        }
    )
    .unwrap();
    out.push_str("x,variance\n");
    for x in grid {
        let v = match form {
            Form::Pipeline => pipe.variance_pipeline(x),
            Form::Closed => pipe.variance_closed(x),
        };
        writeln!(out, "{},{}", fmt17(x), fmt17(v)).unwrap();
    }
    Ok(Output::Csv(out))
}

fn verify(flags: &Flags) -> Result<Output, Failure> {
    let tol = threshold(flags, EQUIVALENCE_TOL)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for p in parameter_sets(flags)? {
        let pipe = AsymptoticPipeline::new(p)?;
        let grid = flags.grid(-10.0 * p.theta, 10.0 * p.theta, 1001)?;
        let r = pipe.verify_equivalence(&grid);
        let ok = r.max_rel_deviation <= tol && r.points.iter().all(|pt| pt.pipeline.is_finite());
        pass &= ok;
        worst = worst.max(r.max_rel_deviation);
        rows.push(json!({
            "params": p,
            "points": grid.len(),
            "max_rel_deviation": r.max_rel_deviation,
            "max_abs_deviation": r.max_abs_deviation,
            "pass": ok,
        }));
    }
    Ok(Output::Report {
        outputs: json!({ "tolerance": tol, "sets": rows }),
        pass,
        max_deviation: Some(worst),
    })
}

fn saddle_check(flags: &Flags) -> Result<Output, Failure> {
    let tol = threshold(flags, SADDLE_TOL)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for p in parameter_sets(flags)? {
        let ctx = SaddleContext::new(p)?;
        let grid = flags.grid(-10.0 * p.theta, 10.0 * p.theta, 21)?;
        let r = ctx.check(&grid);
        let ok = r.max_rel_residual <= tol;
        pass &= ok;
        worst = worst.max(r.max_rel_residual);
        rows.push(json!({
            "params": p,
            "points": grid.len(),
            "max_rel_residual": r.max_rel_residual,
            "max_legendre_gap": r.max_legendre_gap,
            "max_saddle_equation_residual": r.max_equation_residual,
            "u_tilde_atm_im": r.u_tilde_atm,
            "pass": ok,
        }));
    }
    Ok(Output::Report {
        outputs: json!({ "tolerance": tol, "sets": rows }),
        pass,
        max_deviation: Some(worst),
    })
}

fn smile(flags: &Flags) -> Result<Output, Failure> {
    let p = flags.require_heston()?;
    let t = flags.require_maturity()?;
    let grid = flags.grid(-0.05, 0.05, 21)?;
    let report = heston_smile(&p, t, &grid, &quadrature(flags)?)?;
    if !report.failures.is_empty() {
        let lines: Vec<String> = report
            .failures
            .iter()
            .map(|f| format!("x = {} (k = {}): {}", f.x, f.k, f.error))
            .collect();
        return Err(Failure::numerical(format!(
            "{} of {} smile points failed\n{}",
            lines.len(),
            grid.len(),
            lines.join("\n")
        )));
    }
    Ok(Output::Csv(report.smile.to_csv()))
}

fn converge(flags: &Flags) -> Result<Output, Failure> {
    let p = flags.require_heston()?;
    let tlist = flags
        .tlist
        .clone()
        .unwrap_or_else(|| vec![1.0, 5.0, 20.0, 50.0]);
    let grid = flags.grid(-0.05, 0.05, 21)?;
    let report = convergence_study(&p, &tlist, &grid, &quadrature(flags)?)?;
    let last = report.rows.last().map(|r| r.max_rel_error);
    Ok(Output::Report {
        pass: report.strictly_decreasing,
        max_deviation: last,
        outputs: to_value(&report),
    })
}

fn fit(flags: &Flags) -> Result<Output, Failure> {
    let path = flags
        .input
        .as_ref()
        .ok_or_else(|| Failure::input("smile CSV required: --input <file> (or - for stdin)"))?;
    let smile = if path.as_os_str() == "-" {
        Smile::read_csv(std::io::stdin().lock(), flags.maturity)?
    } else {
        let file = std::fs::File::open(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        Smile::read_csv(BufReader::new(file), flags.maturity)?
    };
    let result = fit_svi(&smile, None)?;
    if !result.converged {
        return Err(Failure::numerical(format!(
            "fit did not converge after {} iterations (gradient norm {:e}, objective {:e})",
            result.iterations, result.gradient_norm, result.objective
        )));
    }
    Ok(Output::Report {
        pass: true,
        max_deviation: Some(result.objective),
        outputs: to_value(&result),
    })
}

fn map_params(flags: &Flags) -> Result<Output, Failure> {
    let p = flags.require_heston()?;
    let t = flags.require_maturity()?;
    let constants = derive_constants(&p)?;
    let omega = heston_to_svi_omega(&p)?;
    let raw = svi_omega_to_raw(&omega, t)?;
    Ok(Output::Report {
        outputs: json!({
            "constants": constants,
            "omega": omega,
            "raw": raw,
            "diagnostics": omega.diagnostics(),
        }),
        pass: true,
        max_deviation: None,
    })
}
