//! Twin runs on shared noise and the weighted Gronwall envelope of their
//! difference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{auxiliary_rng, uniqueness_regime};
use crate::error::DiagnosticsError;
use crate::field::SpectralField;
use crate::integrator::{Simulation, StepEvent, Status};

use super::PropertyReport;

/// Exponent `ρ(t)` that absorbs the convective coupling of the two runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UniquenessWeight {
    /// `ρ' = coef · ⌀|u₂|⁴`, where `⌀` is the grid mean (2D, `r ≤ 3`).
    /// The coefficient is `27 / (8μ³)` times the torus volume, which
    /// converts the mean to the Lebesgue `L⁴` norm of the inequality.
    Ladyzhenskaya { coef: f64 },
    /// `ρ' = 2ζ̂` with `ζ̂ = (r-3)/(2μ(r-1)) · (4/(βμ(r-1)))^{2/(r-3)}` (`r > 3`).
    ConstantRate { rate: f64 },
    /// Absorption dominates convection outright (3D, `r = 3`, `2βμ ≥ 1`).
    Zero,
}

impl UniquenessWeight {
    pub fn for_regime(d: usize, r: f64, mu: f64, beta: f64) -> Result<Self, DiagnosticsError> {
        uniqueness_regime(d, r, mu, beta).map_err(|e| DiagnosticsError::Regime(e.to_string()))?;
        if r > 3.0 {
            if !(beta > 0.0) {
                return Err(DiagnosticsError::Regime(format!("r = {r} needs β > 0")));
            }
            let zeta = (r - 3.0) / (2.0 * mu * (r - 1.0)) * (4.0 / (beta * mu * (r - 1.0))).powf(2.0 / (r - 3.0));
            return Ok(Self::ConstantRate { rate: 2.0 * zeta });
        }
        if d == 2 {
            let volume = (2.0 * std::f64::consts::PI).powi(2);
            return Ok(Self::Ladyzhenskaya {
                coef: 27.0 / (8.0 * mu.powi(3)) * volume,
            });
        }
        Ok(Self::Zero)
    }
}

struct TwinOutcome {
    completed: bool,
    /// `max_t e^{-ρ(t)} ‖z(t)‖² / (‖z₀‖² e^{Lt})`.
    ratio: f64,
    sup_z: f64,
    all_zero: bool,
}

fn unit_direction(sim: &Simulation, trajectory: u64) -> SpectralField {
    let mut rng = auxiliary_rng(sim.seed, 60 + trajectory);
    let f = SpectralField::random(sim.basis(), &mut rng, 1.0);
    f.scaled(1.0 / f.norm_h())
}

fn twin(
    sim: &Simulation,
    u0: &SpectralField,
    delta: f64,
    trajectory: u64,
    weight: UniquenessWeight,
    lipschitz: f64,
) -> Result<TwinOutcome, DiagnosticsError> {
    let record = sim.sample_record(trajectory)?;
    // `u + 0·e` would flip signed zeros, so the δ = 0 twin is a plain copy.
    let u0b = if delta == 0.0 {
        u0.clone()
    } else {
        u0.add(&unit_direction(sim, trajectory).scaled(delta))
    };
    let mut path_a: Vec<SpectralField> = Vec::new();
    let a = sim.run(u0, record.clone(), &mut |ev: &StepEvent| path_a.push(ev.end.clone()))?;
    let z0 = u0.sub(&u0b).norm_h_sq();
    let mut rho = 0.0;
    let mut i = 0;
    let mut ratio = 0.0f64;
    let mut sup_z = z0.sqrt();
    let mut all_zero = u0.bitwise_eq(&u0b);
    let mut err = None;
    let b = sim.run(&u0b, record, &mut |ev: &StepEvent| {
        match weight {
            UniquenessWeight::Ladyzhenskaya { coef } => match sim.ops.to_physical(ev.u) {
                Ok(p) => rho += coef * p.mean_pow(4.0) * ev.len,
                Err(e) => err = Some(e),
            },
            UniquenessWeight::ConstantRate { rate } => rho += rate * ev.len,
            UniquenessWeight::Zero => {}
        }
        let Some(ua) = path_a.get(i) else { return };
        i += 1;
        let z = ua.sub(ev.end);
        all_zero &= ua.bitwise_eq(ev.end);
        let zz = z.norm_h_sq();
        sup_z = sup_z.max(zz.sqrt());
        let t = ev.start + ev.len;
        let env = z0 * (lipschitz * t).exp();
        let w = (-rho).exp() * zz;
        if env > 0.0 {
            ratio = ratio.max(w / env);
        } else if zz > 0.0 {
            ratio = f64::INFINITY;
        }
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    Ok(TwinOutcome {
        completed: a.status == Status::Completed && b.status == Status::Completed,
        ratio,
        sup_z,
        all_zero: all_zero && a.states_bitwise_eq(&b),
    })
}

/// Twin runs for trajectories `0..seeds` separated initially by `delta`
/// along a random unit direction. For `delta > 0` the weighted difference
/// `e^{-ρ(t)} ‖z(t)‖²` must stay below `‖z₀‖² e^{Lt} (1 + tol)` at every
/// substep; for `delta = 0` the twins must agree bit for bit.
pub fn gronwall_uniqueness_test(
    sim: &Simulation,
    u0: &SpectralField,
    delta: f64,
    seeds: usize,
    scheme_tolerance: f64,
) -> Result<PropertyReport, DiagnosticsError> {
    let cfg = sim.ops.config();
    let d = sim.basis().dim();
    let weight = UniquenessWeight::for_regime(d, cfg.r, cfg.mu, cfg.effective_beta())?;
    let l = sim.noise.declared_constants().l;
    let outcomes: Vec<TwinOutcome> = (0..seeds as u64)
        .into_par_iter()
        .map(|i| twin(sim, u0, delta, i, weight, l))
        .collect::<Result<_, _>>()?;
    let kept: Vec<&TwinOutcome> = outcomes.iter().filter(|o| o.completed).collect();
    let name = format!("gronwall-envelope-d{d}-r{}", cfg.r);
    let (code, param) = match weight {
        UniquenessWeight::Ladyzhenskaya { coef } => (1.0, coef),
        UniquenessWeight::ConstantRate { rate } => (2.0, rate),
        UniquenessWeight::Zero => (0.0, 0.0),
    };
    let sup_z = kept.iter().map(|o| o.sup_z).fold(0.0, f64::max);
    let rep = if delta == 0.0 {
        let all = kept.iter().all(|o| o.all_zero);
        PropertyReport::new(name, kept.len(), if all { 0.0 } else { f64::NEG_INFINITY }, 0.0)
    } else {
        let worst = kept.iter().map(|o| o.ratio).fold(0.0, f64::max);
        PropertyReport::new(name, kept.len(), 1.0 - worst, scheme_tolerance).with("worst_ratio", worst)
    };
    Ok(rep
        .with("delta", delta)
        .with("excluded", (seeds - kept.len()) as f64)
        .with("weight_kind", code)
        .with("weight_parameter", param)
        .with("lipschitz", l)
        .with("sup_difference", sup_z)
        .require(!kept.is_empty()))
}

/// Halving the initial separation halves `sup_t ‖z(t)‖_H` to within 10%.
pub fn delta_scaling_check(
    sim: &Simulation,
    u0: &SpectralField,
    delta: f64,
    seeds: usize,
) -> Result<PropertyReport, DiagnosticsError> {
    let w = UniquenessWeight::Zero;
    let ratios: Vec<Option<f64>> = (0..seeds as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>, DiagnosticsError> {
            let full = twin(sim, u0, delta, i, w, 0.0)?;
            let half = twin(sim, u0, delta / 2.0, i, w, 0.0)?;
            Ok((full.completed && half.completed).then(|| full.sup_z / half.sup_z))
        })
        .collect::<Result<_, _>>()?;
    let ratios: Vec<f64> = ratios.into_iter().flatten().collect();
    let worst = ratios.iter().map(|r| 0.1 - (r / 2.0 - 1.0).abs()).fold(f64::INFINITY, f64::min);
    let max_dev = ratios.iter().map(|r| (r / 2.0 - 1.0).abs()).fold(0.0, f64::max);
    Ok(PropertyReport::new("difference-scales-with-delta", ratios.len(), worst, 0.0)
        .with("delta", delta)
        .with("max_relative_deviation", max_dev)
        .require(!ratios.is_empty()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn refused_regime_is_reported() {
        let e = UniquenessWeight::for_regime(3, 3.0, 0.5, 0.5).unwrap_err();
        assert!(e.to_string().contains("2βμ ≥ 1"), "{e}");
        assert!(UniquenessWeight::for_regime(3, 2.0, 1.0, 1.0).is_err());
        assert_eq!(UniquenessWeight::for_regime(3, 3.0, 1.0, 1.0).unwrap(), UniquenessWeight::Zero);
    }

    #[test]
    fn zero_separation_gives_identical_twins() {
        let text = "[model]\nn = 4\n[time]\nhorizon = 0.25\ndt = 0.015625\n[noise]\nsigma_amplitude = 0.5";
        let cfg = parse_config(text).unwrap();
        let sim = cfg.build().unwrap();
        let u0 = cfg.initial_state(sim.basis()).unwrap();
        let rep = gronwall_uniqueness_test(&sim, &u0, 0.0, 3, 0.05).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.details["sup_difference"], 0.0);
        let rep = gronwall_uniqueness_test(&sim, &u0, 1e-6, 3, 0.05).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
