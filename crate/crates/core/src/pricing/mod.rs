//! Finite-maturity Heston pricing and the Black-Scholes inversion used to turn
//! prices into implied volatilities.

pub mod black_scholes;
pub mod cf;
pub mod convergence;
pub mod fourier;
pub mod quadrature;
pub mod smile;

pub use black_scholes::{bs_call_price, bs_put_price, implied_vol, implied_vol_of, OptionKind};
pub use cf::heston_cf;
pub use convergence::{convergence_study, ConvergenceReport, ConvergenceRow};
pub use fourier::{price_call_fourier, price_otm_fourier, OtmPrice, QuadratureConfig};
pub use smile::{heston_smile, Smile, SmilePoint, SmileReport, SmileSource};
