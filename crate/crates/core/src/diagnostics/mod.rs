//! Numerical checks of the energy identity, moment bounds, operator
//! inequalities, pathwise uniqueness and Galerkin convergence.
//!
//! Every check is seeded and reduces its samples in trajectory order, so a
//! report depends only on its inputs and not on the thread schedule.

mod convergence;
mod ensemble;
mod ledger;
mod noise_stats;
mod properties;
mod suite;
mod uniqueness;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use convergence::{galerkin_convergence_study, residual_study, ConvergenceReport, ResidualStudy};
pub use ensemble::{
    ensemble_energy_balance, moment_bound_check, run_ensemble, stationary_variance_check, summarize_path,
    BalanceReport, MomentReport, PathSummary, Verdict, GRONWALL_CONSTANT,
};
pub use ledger::{energy_ledger, EnergyLedger, LedgerRow};
pub use noise_stats::noise_statistics;
pub use properties::{
    absorption_lipschitz_suite, check_monotonicity, convection_dual_bound_suite, inner_product_suite,
    operator_identity_suite, random_field,
};
pub use suite::{verify_suite, EXPONENTS};
pub use uniqueness::{delta_scaling_check, gronwall_uniqueness_test, UniquenessWeight};

/// Outcome of one property check.
///
/// `worst_margin` is the smallest slack seen over all samples; the check
/// passes when it is at least `-tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl PropertyReport {
    pub fn new(name: impl Into<String>, samples: usize, worst_margin: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            samples,
            worst_margin,
            tolerance,
            pass: worst_margin >= -tolerance,
            details: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    /// Force failure regardless of the margin (e.g. a structural check).
    pub fn require(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }
}
