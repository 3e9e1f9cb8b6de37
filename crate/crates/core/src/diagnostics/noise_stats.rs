//! Monte Carlo checks of the sampled noise: Itô isometry and zero mean of
//! the Wiener and compensated Poisson integrals, and the law of the jump
//! counts.

use rayon::prelude::*;

use crate::error::DiagnosticsError;
use crate::noise::{NoiseModel, NoiseRecord};
use crate::rng::StreamKey;
use crate::stats::{poisson_chi_square, Estimate};

use super::PropertyReport;

struct PathStats {
    wiener_sq: f64,
    wiener_target: f64,
    wiener_proj: f64,
    jump_sq: f64,
    jump_proj: f64,
    count: u64,
}

/// Integrals with a frozen state of norm `state_norm` and the
/// deterministic weight `f(t) = 1 + t / T` on the Wiener part:
///
/// * `I = Σ f(t_j) σ ΔW_j` with `E‖I‖² = Σ f(t_j)² Δt_j ‖σ‖²_{L_Q}`;
/// * `J = Σ γ(z_i) - T ∫γ λ(dz)` with `E‖J‖² = T ∫‖γ‖² λ(dz)`;
/// * `(I, g)` and `(J, g)` have mean zero, `g` the jump direction (or the
///   first basis mode when jumps are off);
/// * jump counts are Poisson with mean `Λ T` (chi-square at 1%).
///
/// Mean-based checks pass when the sample mean is within `std_errors`
/// standard errors of its target.
pub fn noise_statistics(
    model: &NoiseModel,
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: u64,
    state_norm: f64,
    std_errors: f64,
) -> Result<Vec<PropertyReport>, DiagnosticsError> {
    let basis = model.basis.clone();
    let dofs = model.dofs();
    let probe = if model.gamma.direction.norm_h() > 0.0 {
        model.gamma.direction.clone()
    } else {
        crate::field::SpectralField::single_mode(&basis, 0, 0, 1.0)
    };
    let sig = model.sigma.amplitude * model.sigma.modulation(state_norm);
    let lq = model.sigma_lq_sq(state_norm);
    let gamma_sq = model.gamma_second_moment(state_norm);
    let comp = model.gamma.compensator_drift_at(state_norm, &model.jumps);
    let stats: Vec<PathStats> = (0..paths as u64)
        .into_par_iter()
        .map(|i| -> Result<PathStats, DiagnosticsError> {
            let rec = NoiseRecord::sample(model, StreamKey::new(seed, i), horizon, dt)
                .map_err(|e| DiagnosticsError::Invalid(e.to_string()))?;
            let mut acc = vec![0.0; rec.dof];
            let mut target = 0.0;
            for s in &rec.segments {
                let f = 1.0 + s.start / horizon;
                for (a, x) in acc.iter_mut().zip(&s.dw) {
                    *a += f * x;
                }
                target += f * f * s.len * lq;
            }
            let wiener = if rec.dof > 0 {
                dofs.to_field(&basis, &acc).scaled(sig)
            } else {
                crate::field::SpectralField::zeros(&basis)
            };
            let mut jump = comp.scaled(-horizon);
            for &z in &rec.marks {
                jump.axpy(1.0, &model.gamma.jump_increment_at(state_norm, z));
            }
            Ok(PathStats {
                wiener_sq: wiener.norm_h_sq(),
                wiener_target: target,
                wiener_proj: wiener.inner(&probe),
                jump_sq: jump.norm_h_sq(),
                jump_proj: jump.inner(&probe),
                count: rec.jump_times.len() as u64,
            })
        })
        .collect::<Result<_, _>>()?;

    let z_report = |name: &str, xs: Vec<f64>, target: f64| {
        let e = Estimate::of(&xs);
        PropertyReport::new(name, xs.len(), std_errors - e.z_score(target), 0.0)
            .with("mean", e.mean)
            .with("std_error", e.std_error)
            .with("target", target)
    };
    let mut out = Vec::new();
    if model.wiener_is_active() {
        out.push(z_report(
            "wiener-ito-isometry",
            stats.iter().map(|s| s.wiener_sq - s.wiener_target).collect(),
            0.0,
        ));
        out.push(z_report("wiener-mean-zero", stats.iter().map(|s| s.wiener_proj).collect(), 0.0));
    }
    if model.jumps_are_active() {
        let target = horizon * gamma_sq;
        out.push(z_report("jump-ito-isometry", stats.iter().map(|s| s.jump_sq).collect(), target));
        out.push(z_report("jump-mean-zero", stats.iter().map(|s| s.jump_proj).collect(), 0.0));
        let counts: Vec<u64> = stats.iter().map(|s| s.count).collect();
        let fit = poisson_chi_square(&counts, model.jumps.intensity * horizon);
        out.push(
            PropertyReport::new("poisson-counts", counts.len(), fit.p_value - 0.01, 0.0)
                .with("statistic", fit.statistic)
                .with("degrees_of_freedom", fit.degrees_of_freedom as f64)
                .with("p_value", fit.p_value),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn small_noise_suite_runs() {
        let text = "[model]\nn = 3\n[noise]\nsigma_amplitude = 0.7\nintensity = 3.0\ngamma_c0 = 0.5\n\
                    mark_low = 0.0\nmark_high = 2.0";
        let cfg = parse_config(text).unwrap();
        let basis = cfg.basis().unwrap();
        let model = cfg.noise_model(&basis).unwrap();
        let reps = noise_statistics(&model, 1.0, 0.125, 400, 7, 1.0, 4.0).unwrap();
        assert_eq!(reps.len(), 5);
        for r in &reps {
            assert!(r.pass, "{r:?}");
        }
    }
}
