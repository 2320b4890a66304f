use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use heston_svi::HestonParams;

use crate::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "heston-svi",
    version,
    about = "Large-maturity Heston smiles, SVI parameters and the maps between them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sample the large-maturity implied variance on an x grid (CSV)
    Asymptote,
    /// Check the pipeline, closed form and SVI form agree (JSON)
    Verify,
    /// Check the exponent-matching condition on an x grid (JSON)
    SaddleCheck,
    /// Price a finite-maturity Heston smile at k = x T (CSV)
    Smile,
    /// Compare finite-maturity implied variance with the SVI limit (JSON)
    Converge,
    /// Fit raw SVI to a smile CSV and interpret the result (JSON)
    Fit,
    /// Print the omega-form and raw SVI parameters of a Heston model (JSON)
    MapParams,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Asymptote => "asymptote",
            Command::Verify => "verify",
            Command::SaddleCheck => "saddle-check",
            Command::Smile => "smile",
            Command::Converge => "converge",
            Command::Fit => "fit",
            Command::MapParams => "map-params",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Pipeline,
    Closed,
}

/// Every flag is optional so a JSON config can fill the gaps; the command line wins.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub v0: Option<f64>,
    /// Maturity in years
    #[arg(long = "T", global = true, allow_negative_numbers = true)]
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub xmin: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub xmax: Option<f64>,
    /// Number of grid points
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Explicit comma-separated x grid, overrides --xmin/--xmax/--n
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    /// Seed for the randomised parameter suites
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of random parameter sets drawn with --seed
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub form: Option<Form>,
    /// Pass threshold for verify/saddle-check; quadrature tolerance for smile/converge
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated maturities for converge
    #[arg(long, global = true, value_delimiter = ',')]
    pub tlist: Option<Vec<f64>>,
    /// Smile CSV for fit (`-` for stdin)
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// JSON file supplying defaults for any of the flags above
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($cli:expr, $file:expr, $($f:ident),*) => {
        Flags { $($f: $cli.$f.or($file.$f),)* config: $cli.config }
    };
}

impl Flags {
    /// Fills unset flags from the config file named by `--config`.
    pub fn resolve(self) -> Result<Flags, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = read_config(&path)?;
        Ok(merge_fields!(
            self, file, kappa, theta, sigma, rho, v0, maturity, xmin, xmax, n, grid, seed, count,
            form, tol, out, tlist, input
        ))
    }

    /// The Heston parameters, if all five were given.
    pub fn heston(&self) -> Result<Option<HestonParams>, Failure> {
        let fields = [self.kappa, self.theta, self.sigma, self.rho, self.v0];
        match fields {
            [Some(kappa), Some(theta), Some(sigma), Some(rho), Some(v0)] => {
                Ok(Some(HestonParams::new(kappa, theta, sigma, rho, v0)))
            }
            [None, None, None, None, None] => Ok(None),
            _ => {
                let names = ["--kappa", "--theta", "--sigma", "--rho", "--v0"];
                let missing: Vec<&str> = names
                    .iter()
                    .zip(fields)
                    .filter(|(_, v)| v.is_none())
                    .map(|(n, _)| *n)
                    .collect();
                Err(Failure::input(format!("missing {}", missing.join(", "))))
            }
        }
    }

    pub fn require_heston(&self) -> Result<HestonParams, Failure> {
        self.heston()?.ok_or_else(|| {
            Failure::input("Heston parameters required: --kappa --theta --sigma --rho --v0")
        })
    }

    pub fn require_maturity(&self) -> Result<f64, Failure> {
        self.maturity
            .ok_or_else(|| Failure::input("maturity required: --T"))
    }

    /// The explicit grid, or `n` points on `[xmin, xmax]` with the given defaults.
    pub fn grid(&self, xmin: f64, xmax: f64, n: usize) -> Result<Vec<f64>, Failure> {
        if let Some(g) = &self.grid {
            if g.is_empty() {
                return Err(Failure::input("--grid is empty"));
            }
            return Ok(g.clone());
        }
        let lo = self.xmin.unwrap_or(xmin);
        let hi = self.xmax.unwrap_or(xmax);
        let n = self.n.unwrap_or(n);
        if n == 0 {
            return Err(Failure::input("--n must be at least 1"));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Failure::input(format!("bad grid range [{lo}, {hi}]")));
        }
        Ok(heston_svi::linspace(lo, hi, n))
    }
}

fn read_config(path: &Path) -> Result<Flags, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))
}
