//! Pathwise energy ledger.
//!
//! The stored noise record is replayed through the integrator and every
//! term of the Itô expansion of `‖u‖²_H` is accumulated with the scheme's
//! own increments, evaluated at the left end of each substep.

use serde::{Deserialize, Serialize};

use crate::error::DiagnosticsError;
use crate::integrator::{Simulation, StepEvent, Trajectory};

/// Cumulative terms at one output time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub time: f64,
    #[serde(rename = "energy_H2")]
    pub energy_h2: f64,
    /// `2μ ∫ ‖u‖²_V ds`.
    #[serde(rename = "diss_V")]
    pub diss_v: f64,
    /// `2β ∫ ‖u‖^{r+1}_{L^{r+1}} ds`.
    #[serde(rename = "diss_Lr1")]
    pub diss_lr1: f64,
    /// `2 ∫ (σ dW, u)`.
    pub mart_wiener: f64,
    /// `2 ∫∫ (γ, u(s-)) dπ̃`.
    pub mart_jump: f64,
    /// `∫ ‖σ‖²_{L_Q} ds`.
    pub qv_sigma: f64,
    /// `Σ ‖γ‖²` over realized jumps.
    pub qv_gamma: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
    pub jumps: usize,
    /// Largest `|Δ‖u‖² - 2(γ, u⁻) - ‖γ‖²|`, relative to `max(1, ‖u⁺‖²)`.
    pub max_jump_defect: f64,
    /// `∫∫ ‖γ‖² λ(dz) ds`, the compensator of `qv_gamma`.
    pub qv_gamma_compensated: f64,
}

impl EnergyLedger {
    pub fn terminal(&self) -> &LedgerRow {
        self.rows.last().expect("ledger has at least one row")
    }
}

#[derive(Default)]
struct Accumulator {
    e0: f64,
    diss_v: f64,
    diss_lr1: f64,
    mart_wiener: f64,
    mart_jump: f64,
    qv_sigma: f64,
    qv_gamma: f64,
    qv_gamma_comp: f64,
    max_jump_defect: f64,
    jumps: usize,
}

impl Accumulator {
    fn row(&self, time: f64, energy: f64) -> LedgerRow {
        let residual = energy - self.e0 + self.diss_v + self.diss_lr1
            - self.mart_wiener
            - self.mart_jump
            - self.qv_sigma
            - self.qv_gamma;
        LedgerRow {
            time,
            energy_h2: energy,
            diss_v: self.diss_v,
            diss_lr1: self.diss_lr1,
            mart_wiener: self.mart_wiener,
            mart_jump: self.mart_jump,
            qv_sigma: self.qv_sigma,
            qv_gamma: self.qv_gamma,
            residual,
        }
    }

    fn absorb(&mut self, ev: &StepEvent, mu: f64, beta: f64) {
        let s = ev.len;
        self.diss_v += 2.0 * mu * ev.norm_v_sq * s;
        self.diss_lr1 += 2.0 * beta * ev.lr1_pow * s;
        if let Some(inc) = ev.diffusion {
            self.mart_wiener += 2.0 * inc.inner(ev.u);
            self.qv_sigma += ev.sigma_lq_sq * s;
        }
        if let Some(c) = ev.compensator {
            self.mart_jump -= 2.0 * s * c.inner(ev.u);
            self.qv_gamma_comp += ev.gamma_m2 * s;
        }
        if let Some(j) = &ev.jump {
            let cross = 2.0 * j.gamma.inner(j.before);
            let sq = j.gamma.norm_h_sq();
            self.mart_jump += cross;
            self.qv_gamma += sq;
            let after = ev.end.norm_h_sq();
            let defect = ((after - j.before.norm_h_sq()) - (cross + sq)).abs() / after.max(1.0);
            self.max_jump_defect = self.max_jump_defect.max(defect);
            self.jumps += 1;
        }
    }
}

/// Replays `tr` through `sim` and tabulates the energy identity at the
/// trajectory's output times. The replay must reproduce the stored states
/// bit for bit.
pub fn energy_ledger(sim: &Simulation, tr: &Trajectory) -> Result<EnergyLedger, DiagnosticsError> {
    let record = tr.record.clone().ok_or(DiagnosticsError::MissingNoiseRecord)?;
    let cfg = sim.ops.config();
    let (mu, beta) = (cfg.mu, cfg.effective_beta());
    let eps = 1e-9 * record.dt;
    let times = tr.times.clone();
    let u0 = tr.initial().clone();
    let mut acc = Accumulator {
        e0: u0.norm_h_sq(),
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(times.len());
    let mut last_energy = acc.e0;
    let mut next_out = 0;
    let replay = sim.run(&u0, record, &mut |ev: &StepEvent| {
        while next_out < times.len() && times[next_out] < ev.start + ev.len - eps {
            rows.push(acc.row(times[next_out], ev.norm_h_sq));
            next_out += 1;
        }
        acc.absorb(ev, mu, beta);
        last_energy = ev.end.norm_h_sq();
    })?;
    for &t in &times[next_out..] {
        rows.push(acc.row(t, last_energy));
    }
    if !replay.states_bitwise_eq(tr) || replay.status != tr.status {
        let at = replay
            .times
            .iter()
            .zip(replay.states.iter().zip(&tr.states))
            .find(|(_, (a, b))| !a.bitwise_eq(b))
            .map(|(t, _)| *t)
            .unwrap_or(tr.horizon);
        return Err(DiagnosticsError::ReplayMismatch(at));
    }
    Ok(EnergyLedger {
        rows,
        jumps: acc.jumps,
        max_jump_defect: acc.max_jump_defect,
        qv_gamma_compensated: acc.qv_gamma_comp,
    })
}
