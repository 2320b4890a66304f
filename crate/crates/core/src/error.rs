use thiserror::Error;

use crate::params::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(ValidationReport),

    /// `kappa - rho * sigma <= 0`: moments above one explode in finite time and the
    /// large-maturity smile is not defined.
    #[error(
        "large correlation regime: kappa - rho*sigma = {gap} <= 0, the large-maturity smile is undefined"
    )]
    LargeCorrelationRegime { gap: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// Raw SVI parameters that do not satisfy `b = omega1 * omega2 / (2T)`.
    #[error("raw SVI parameters are not Heston-consistent: relative residual {residual:e}")]
    Inconsistent { residual: f64 },

    #[error(
        "quadrature missed its tolerance: estimate {estimate}, error estimate {error_estimate:e} > {tolerance:e}"
    )]
    Accuracy {
        estimate: f64,
        error_estimate: f64,
        tolerance: f64,
    },

    #[error("price {price} violates the no-arbitrage band ({lower}, {upper})")]
    Arbitrage { price: f64, lower: f64, upper: f64 },

    #[error("price {price} sits on the edge of the no-arbitrage band, implied volatility is 0 or infinite")]
    BoundaryPrice { price: f64 },

    #[error("underdetermined fit: {points} smile points for 5 parameters")]
    Underdetermined { points: usize },

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("smile data: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by the numbers coming out wrong rather than the inputs
    /// being wrong.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Accuracy { .. } | Error::NotConverged(_))
    }
}
