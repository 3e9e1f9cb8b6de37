//! Convergence studies in the cutoff and in the step size.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::DiagnosticsError;
use crate::stats::log_log_slope;

use super::ledger::energy_ledger;

fn config_error(e: crate::error::ConfigError) -> DiagnosticsError {
    DiagnosticsError::Invalid(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub cutoffs: Vec<usize>,
    /// `sup_t ‖u_{n_i} - u_{n_{i+1}}‖_H` over output times.
    pub sup_differences: Vec<f64>,
    pub terminal_differences: Vec<f64>,
    /// `-slope` of `ln ‖u_{n_i}(T) - u_{n_{i+1}}(T)‖` against `ln n_i`.
    pub rate: f64,
    pub strictly_decreasing: bool,
    pub min_rate: f64,
    pub pass: bool,
}

/// Runs the configuration at every cutoff with the same seed. The initial
/// state is built on the largest basis and truncated, and the mode-keyed
/// noise streams make every smaller run see the restriction of the same
/// forcing.
pub fn galerkin_convergence_study(
    cfg: &RunConfig,
    cutoffs: &[usize],
    trajectory: u64,
    min_rate: f64,
) -> Result<ConvergenceReport, DiagnosticsError> {
    if cutoffs.len() < 2 || cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiagnosticsError::Invalid("cutoffs must be increasing, at least two".into()));
    }
    let mut largest = cfg.clone();
    largest.model.n = *cutoffs.last().expect("non-empty");
    let top_basis = largest.basis().map_err(config_error)?;
    let u0_top = largest.initial_state(&top_basis).map_err(config_error)?;
    let mut runs = Vec::with_capacity(cutoffs.len());
    for &n in cutoffs {
        let mut c = cfg.clone();
        c.model.n = n;
        let sim = c.build().map_err(config_error)?;
        let u0 = u0_top.transfer_to(sim.basis());
        runs.push(sim.simulate(&u0, trajectory)?.into_result()?);
    }
    let mut sup_differences = Vec::new();
    let mut terminal_differences = Vec::new();
    for pair in runs.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let target = hi.states[0].basis().clone();
        let mut sup = 0.0f64;
        for (a, b) in lo.states.iter().zip(&hi.states) {
            sup = sup.max(a.transfer_to(&target).sub(b).norm_h());
        }
        sup_differences.push(sup);
        terminal_differences.push(lo.terminal().transfer_to(&target).sub(hi.terminal()).norm_h());
    }
    let all_zero = terminal_differences.iter().chain(&sup_differences).all(|&x| x == 0.0);
    let strictly_decreasing = sup_differences.windows(2).all(|w| w[1] < w[0]);
    let ns: Vec<f64> = cutoffs[..cutoffs.len() - 1].iter().map(|&n| n as f64).collect();
    let rate = if all_zero {
        f64::INFINITY
    } else if terminal_differences.iter().all(|&x| x > 0.0) && ns.len() >= 2 {
        -log_log_slope(&ns, &terminal_differences)
    } else {
        f64::NAN
    };
    let pass = all_zero || (strictly_decreasing && rate >= min_rate);
    Ok(ConvergenceReport {
        cutoffs: cutoffs.to_vec(),
        sup_differences,
        terminal_differences,
        rate,
        strictly_decreasing,
        min_rate,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualStudy {
    pub dts: Vec<f64>,
    /// `|residual(T)|` of the energy ledger per step size.
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub min_slope: f64,
    pub pass: bool,
}

/// Energy-ledger residual at `T` for step sizes `dt_0 · 2^{-j}`,
/// `j = 0..levels`. One noise record is sampled on the finest grid and
/// coarsened for the others.
pub fn residual_study(cfg: &RunConfig, levels: usize, min_slope: f64) -> Result<ResidualStudy, DiagnosticsError> {
    if levels < 2 {
        return Err(DiagnosticsError::Invalid("need at least two step sizes".into()));
    }
    let dt0 = cfg.time.dt;
    let factor_max = 1usize << (levels - 1);
    let mut fine_cfg = cfg.clone();
    fine_cfg.time.dt = dt0 / factor_max as f64;
    let fine = fine_cfg.build().map_err(config_error)?;
    let u0 = cfg.initial_state(fine.basis()).map_err(config_error)?;
    let fine_record = fine.sample_record(0)?;
    let mut dts = Vec::new();
    let mut residuals = Vec::new();
    for j in 0..levels {
        let factor = factor_max >> j;
        let mut c = cfg.clone();
        c.time.dt = dt0 / (1usize << j) as f64;
        let sim = c.build().map_err(config_error)?;
        let rec = fine_record
            .coarsen(factor)
            .map_err(|e| DiagnosticsError::Invalid(e.to_string()))?;
        let tr = sim.run(&u0, rec, &mut |_| {})?.into_result()?;
        let ledger = energy_ledger(&sim, &tr)?;
        dts.push(c.time.dt);
        residuals.push(ledger.terminal().residual.abs());
    }
    let slope = if residuals.iter().all(|&r| r > 0.0) {
        log_log_slope(&dts, &residuals)
    } else if residuals.iter().all(|&r| r == 0.0) {
        f64::INFINITY
    } else {
        f64::NAN
    };
    Ok(ResidualStudy {
        dts,
        residuals,
        slope,
        min_slope,
        pass: slope >= min_slope,
    })
}
