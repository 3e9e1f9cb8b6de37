//! The fixed property battery behind the `verify` command.

use crate::config::{auxiliary_rng, RunConfig};
use crate::error::DiagnosticsError;
use crate::noise::{certification_corpus, certify_hypotheses};
use crate::operators::{Dealias, OperatorConfig, Operators};

use super::{
    absorption_lipschitz_suite, check_monotonicity, convection_dual_bound_suite, inner_product_suite,
    noise_statistics, operator_identity_suite, PropertyReport,
};

/// Exponents covered by the operator checks.
pub const EXPONENTS: [f64; 4] = [1.0, 2.0, 3.0, 5.0];

/// Operator identities, monotonicity, Lipschitz and dual bounds on the
/// configured basis (cutoff capped at 8), then noise statistics and
/// hypothesis certification for the configured noise model. `samples`
/// sets the corpus size of each check. The output depends only on the
/// configuration and `samples`.
pub fn verify_suite(cfg: &RunConfig, samples: usize) -> Result<Vec<PropertyReport>, DiagnosticsError> {
    let invalid = |e: crate::error::ConfigError| DiagnosticsError::Invalid(e.to_string());
    let seed = cfg.run.seed;
    let mut small = cfg.clone();
    small.model.n = cfg.model.n.min(8);
    let basis = small.basis().map_err(invalid)?;
    let mut out = vec![operator_identity_suite(&basis, samples, seed)];
    out.extend(inner_product_suite(&basis, samples, &EXPONENTS, seed)?);
    for r in EXPONENTS {
        let ops = Operators::new(
            &basis,
            OperatorConfig {
                r,
                dealias: Dealias::ExactConvolution,
                ..OperatorConfig::default()
            },
        )?;
        out.push(check_monotonicity(&ops, samples, seed)?);
        out.push(absorption_lipschitz_suite(&ops, samples, seed)?);
        if r > 3.0 {
            out.push(convection_dual_bound_suite(&ops, samples, seed)?);
        }
    }

    let full = cfg.basis().map_err(invalid)?;
    let model = cfg.noise_model(&full).map_err(invalid)?;
    out.extend(noise_statistics(
        &model,
        cfg.time.horizon.max(cfg.time.dt),
        cfg.time.dt,
        samples,
        seed,
        1.0,
        cfg.tolerances.std_errors,
    )?);
    let corpus = certification_corpus(&full, samples.min(2000), 10.0, &mut auxiliary_rng(seed, 70));
    let cert = certify_hypotheses(&model, &corpus);
    out.push(
        PropertyReport::new(
            "noise-hypotheses",
            cert.samples,
            if cert.pass { 0.0 } else { -(cert.violations.len() as f64) },
            0.0,
        )
        .with("k1", cert.constants.k1)
        .with("k2", cert.constants.k2)
        .with("l", cert.constants.l)
        .with("growth_ratio", cert.growth_ratio)
        .with("moment_ratio", cert.moment_ratio)
        .with("lipschitz_ratio", cert.lipschitz_ratio),
    );
    Ok(out)
}
