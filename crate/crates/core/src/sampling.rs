//! Seeded random parameter sets for the randomized verification suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::params::HestonParams;

/// `count` parameter sets satisfying Feller and `kappa - rho sigma > 0`, drawn
/// deterministically from `seed`.
///
/// Ranges: `kappa` in [0.5, 4], `theta` in [0.01, 0.25], `sigma` in [0.1, 1],
/// `rho` in [-0.9, 0.6], `v0` in [0.01, 0.25]; draws violating a constraint are
/// discarded.
pub fn random_admissible_params(seed: u64, count: usize) -> Vec<HestonParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = HestonParams::new(
            rng.gen_range(0.5..4.0),
            rng.gen_range(0.01..0.25),
            rng.gen_range(0.1..1.0),
            rng.gen_range(-0.9..0.6),
            rng.gen_range(0.01..0.25),
        );
        if p.require_asymptotic().is_ok() {
            out.push(p);
        }
    }
    out
}
