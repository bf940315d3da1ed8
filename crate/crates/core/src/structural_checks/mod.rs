//! Structural consequences of the identities: ultrametricity, positivity,
//! the both-or-neither property of `F̄`, constrained replica sequences and
//! exchangeability of the top atoms.
//!
//! Reports reuse [`IdentityReport`]: `lhs` is the observed statistic, `rhs`
//! the value the property predicts, and `details` carries the counts.

mod exchange;
mod prop2;
mod sequence;
mod ultra;

pub use exchange::{check_exchangeability, orbit_canonical, top_atoms, ExchangeOptions};
pub use prop2::{check_prop2, prop2_masses, ZERO_TOL};
pub use sequence::{check_sequence, greedy_sequence, packing_bound};
pub use ultra::{check_positivity, check_ultrametric, exact_ultrametric_violation, is_violation};

use crate::identity_checks::IdentityReport;
use crate::mc_engine::EstimatorConfig;

/// Report for an exact zero-count property: passes iff nothing was observed.
pub(crate) fn count_report(
    name: &str,
    violations: usize,
    trials: usize,
    config: &EstimatorConfig,
    details: serde_json::Value,
) -> IdentityReport {
    let rate = violations as f64 / trials.max(1) as f64;
    IdentityReport {
        name: name.to_string(),
        lhs: rate,
        rhs: 0.0,
        se_lhs: 0.0,
        se_rhs: 0.0,
        se_diff: 0.0,
        z: if violations == 0 { 0.0 } else { f64::INFINITY },
        n_outer: trials,
        seed: config.seed,
        pass: violations == 0,
        wall_time_s: 0.0,
        details: Some(details),
    }
}
