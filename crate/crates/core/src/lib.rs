//! SVI implied-variance smiles, the large-maturity Heston smile, and the exact
//! correspondence between the two, with a finite-maturity Heston pricer to watch
//! the Heston smile converge to SVI.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod error;
pub mod fit;
pub mod params;
pub mod pricing;
pub mod saddle;
pub mod sampling;
pub mod svi;

pub use asymptotic::{linspace, AsymptoticPipeline, EquivalenceReport, EQUIVALENCE_TOL};
pub use error::{Error, Result};
pub use params::{
    derive_constants, heston_to_svi_omega, svi_omega_to_raw, svi_raw_to_omega, validate_heston,
    DerivedConstants, HestonParams, SviOmegaParams, SviRawParams, ValidationReport,
};
pub use svi::{SmileDiagnostics, WingSlopes};
