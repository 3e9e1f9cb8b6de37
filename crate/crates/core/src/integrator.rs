//! Jump-adapted tamed Euler–Maruyama integration of the Galerkin system.
//!
//! Each substep runs from a grid point or jump time to the next one. With
//! drift `D(u) = -μAu - B(u, u) - βC(u)` the update is
//!
//! ```text
//! u⁻ = u + s D(u) / (1 + s‖D(u)‖_H) + σ(u) ΔW - s G(u) m₁ g
//! u⁺ = u⁻ + G(u⁻) z g            (only if the substep ends at a jump)
//! ```
//!
//! The exponential variant drops `μAu` from `D` and multiplies `u⁻` by
//! `e^{-μ|k|² s}` mode by mode.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::BasisIndex;
use crate::error::IntegratorError;
use crate::field::SpectralField;
use crate::noise::{NoiseModel, NoiseRecord};
use crate::operators::{apply_stokes, Operators};
use crate::rng::StreamKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    TamedExplicit,
    ExponentialTamed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepScheme {
    pub kind: SchemeKind,
    pub dt: f64,
    pub taming: bool,
    /// Absolute bound on `‖u‖_H`; `None` means `1e6 · max(‖u₀‖_H, 1)`.
    pub guard: Option<f64>,
}

impl StepScheme {
    pub fn new(kind: SchemeKind, dt: f64) -> Self {
        Self {
            kind,
            dt,
            taming: true,
            guard: None,
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(IntegratorError::Invalid(format!("dt > 0 required, got {}", self.dt)));
        }
        if let Some(g) = self.guard {
            if !(g > 0.0) {
                return Err(IntegratorError::Invalid(format!("guard > 0 required, got {g}")));
            }
        }
        Ok(())
    }

    pub fn guard_for(&self, u0: &SpectralField) -> f64 {
        self.guard.unwrap_or_else(|| 1e6 * u0.norm_h().max(1.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdeState {
    pub u: SpectralField,
    pub t: f64,
    pub steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Status {
    Completed,
    GuardTripped { time: f64 },
}

/// States at the requested output times and the noise that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub d: usize,
    pub n: usize,
    pub r: f64,
    pub mu: f64,
    pub beta: f64,
    pub horizon: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub record: Option<NoiseRecord>,
    pub status: Status,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.status == Status::Completed
    }

    pub fn initial(&self) -> &SpectralField {
        &self.states[0]
    }

    pub fn terminal(&self) -> &SpectralField {
        self.states.last().expect("trajectory has at least one state")
    }

    /// `Err` for guard-tripped runs.
    pub fn into_result(self) -> Result<Trajectory, IntegratorError> {
        match self.status {
            Status::Completed => Ok(self),
            Status::GuardTripped { time } => Err(IntegratorError::GuardTripped {
                time,
                norm: self.terminal().norm_h(),
            }),
        }
    }

    /// Bitwise comparison of times and states.
    pub fn states_bitwise_eq(&self, other: &Trajectory) -> bool {
        self.times.len() == other.times.len()
            && self.times.iter().zip(&other.times).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.states.len() == other.states.len()
            && self.states.iter().zip(&other.states).all(|(a, b)| a.bitwise_eq(b))
    }
}

/// A realized jump inside a substep.
#[derive(Debug)]
pub struct JumpEvent<'a> {
    pub index: usize,
    pub time: f64,
    pub mark: f64,
    /// State just before the jump, `u(τ-)`.
    pub before: &'a SpectralField,
    /// `γ(u(τ-), z)`.
    pub gamma: &'a SpectralField,
}

/// Everything one substep computed, handed to observers.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub start: f64,
    pub len: f64,
    /// State at the start of the substep.
    pub u: &'a SpectralField,
    pub norm_h_sq: f64,
    pub norm_v_sq: f64,
    /// Grid mean of `|u|^{r+1}` (zero when absorption is off).
    pub lr1_pow: f64,
    /// `σ(u) ΔW`, if the Wiener part is active.
    pub diffusion: Option<&'a SpectralField>,
    /// `‖σ(u)‖²_{L_Q}`.
    pub sigma_lq_sq: f64,
    /// `G(u) m₁ g`, if jumps are active.
    pub compensator: Option<&'a SpectralField>,
    /// `∫ ‖γ(u, z)‖² λ(dz)`.
    pub gamma_m2: f64,
    pub jump: Option<JumpEvent<'a>>,
    /// State at the end of the substep, jump included.
    pub end: &'a SpectralField,
}

/// Operators, forcing and time stepping for one experiment.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub ops: Operators,
    pub noise: NoiseModel,
    pub scheme: StepScheme,
    pub horizon: f64,
    pub output_times: Vec<f64>,
    pub seed: u64,
}

/// `count + 1` equally spaced times covering `[0, T]`.
pub fn uniform_outputs(horizon: f64, count: usize) -> Vec<f64> {
    if horizon == 0.0 || count == 0 {
        return vec![0.0];
    }
    (0..=count).map(|i| horizon * i as f64 / count as f64).collect()
}

impl Simulation {
    pub fn new(
        ops: Operators,
        noise: NoiseModel,
        scheme: StepScheme,
        horizon: f64,
        output_times: Vec<f64>,
        seed: u64,
    ) -> Result<Self, IntegratorError> {
        scheme.validate()?;
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(IntegratorError::Invalid(format!("T >= 0 required, got {horizon}")));
        }
        if output_times.is_empty()
            || output_times.windows(2).any(|w| w[0] > w[1])
            || output_times.iter().any(|&t| t < 0.0 || t > horizon)
        {
            return Err(IntegratorError::Invalid(
                "output times must be non-empty, sorted and inside [0, T]".into(),
            ));
        }
        if ops.basis().dim() != noise.basis.dim() || ops.basis().cutoff() != noise.basis.cutoff() {
            return Err(IntegratorError::Invalid("operators and noise use different bases".into()));
        }
        Ok(Self {
            ops,
            noise,
            scheme,
            horizon,
            output_times,
            seed,
        })
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        self.ops.basis()
    }

    pub fn with_scheme(&self, scheme: StepScheme) -> Self {
        Self {
            scheme,
            ..self.clone()
        }
    }

    pub fn sample_record(&self, trajectory: u64) -> Result<NoiseRecord, IntegratorError> {
        NoiseRecord::sample(
            &self.noise,
            StreamKey::new(self.seed, trajectory),
            self.horizon,
            self.scheme.dt,
        )
        .map_err(|e| IntegratorError::Invalid(e.to_string()))
    }

    /// Fresh noise for `trajectory`, then integrate.
    pub fn simulate(&self, u0: &SpectralField, trajectory: u64) -> Result<Trajectory, IntegratorError> {
        let record = self.sample_record(trajectory)?;
        self.run(u0, record, &mut |_| {})
    }

    /// Two runs driven by one shared noise record.
    pub fn simulate_pair(
        &self,
        u0a: &SpectralField,
        u0b: &SpectralField,
        trajectory: u64,
    ) -> Result<(Trajectory, Trajectory), IntegratorError> {
        let record = self.sample_record(trajectory)?;
        let a = self.run(u0a, record.clone(), &mut |_| {})?;
        let b = self.run(u0b, record, &mut |_| {})?;
        Ok((a, b))
    }

    fn check_record(&self, record: &NoiseRecord) -> Result<(), IntegratorError> {
        let dof = if self.noise.wiener_is_active() {
            self.noise.dofs().len()
        } else {
            0
        };
        if record.dof != dof {
            return Err(IntegratorError::RecordMismatch {
                expected: format!("{dof} Wiener coordinates"),
                found: format!("{}", record.dof),
            });
        }
        if record.horizon.to_bits() != self.horizon.to_bits() {
            return Err(IntegratorError::RecordMismatch {
                expected: format!("horizon {}", self.horizon),
                found: format!("horizon {}", record.horizon),
            });
        }
        Ok(())
    }

    /// One substep of length `len` from `u`; returns the end state.
    pub fn substep(
        &self,
        u: &SpectralField,
        start: f64,
        len: f64,
        dw: &[f64],
        jump: Option<(usize, f64, f64)>,
        observer: &mut dyn FnMut(&StepEvent),
    ) -> Result<SpectralField, IntegratorError> {
        let basis = self.basis();
        let cfg = self.ops.config();
        let exponential = self.scheme.kind == SchemeKind::ExponentialTamed;
        let norm_h_sq = u.norm_h_sq();
        let norm_h = norm_h_sq.sqrt();
        let norm_v_sq = u.norm_v_sq();

        let nl = self.ops.nonlinear_terms(u)?;
        let mut drift = if exponential {
            SpectralField::zeros(basis)
        } else {
            apply_stokes(u).scaled(-cfg.mu)
        };
        if let Some(b) = &nl.convection {
            drift.axpy(-1.0, b);
        }
        if let Some(c) = &nl.absorption {
            drift.axpy(-cfg.beta, c);
        }
        let dn = drift.norm_h();
        let factor = if self.scheme.taming { len / (1.0 + len * dn) } else { len };

        let mut next = u.clone();
        next.axpy(factor, &drift);

        let diffusion = if self.noise.wiener_is_active() {
            let dwf = self.noise.dofs().to_field(basis, dw);
            let inc = self.noise.sigma.diffusion_increment_at(norm_h, &dwf);
            next.axpy(1.0, &inc);
            Some(inc)
        } else {
            None
        };
        let compensator = if self.noise.jumps_are_active() {
            let c = self.noise.gamma.compensator_drift_at(norm_h, &self.noise.jumps);
            next.axpy(-len, &c);
            Some(c)
        } else {
            None
        };
        if exponential {
            for (i, c) in next.coeffs_mut().iter_mut().enumerate() {
                *c *= (-cfg.mu * basis.mode_norm_sq(i) * len).exp();
            }
        }

        let (end, jump_data) = match jump {
            Some((index, time, mark)) => {
                let gamma = self.noise.gamma.jump_increment(&next, mark);
                let end = next.add(&gamma);
                (end, Some((index, time, mark, next, gamma)))
            }
            None => (next, None),
        };

        let event = StepEvent {
            start,
            len,
            u,
            norm_h_sq,
            norm_v_sq,
            lr1_pow: if cfg.absorption { nl.lr1_pow } else { 0.0 },
            diffusion: diffusion.as_ref(),
            sigma_lq_sq: if diffusion.is_some() {
                self.noise.sigma_lq_sq(norm_h)
            } else {
                0.0
            },
            compensator: compensator.as_ref(),
            gamma_m2: if compensator.is_some() {
                self.noise.gamma_second_moment(norm_h)
            } else {
                0.0
            },
            jump: jump_data.as_ref().map(|(index, time, mark, before, gamma)| JumpEvent {
                index: *index,
                time: *time,
                mark: *mark,
                before,
                gamma,
            }),
            end: &end,
        };
        observer(&event);
        Ok(end)
    }

    /// Integrate from `u0` consuming `record`; outputs use the state in
    /// force at each output time (right-continuous at jumps).
    pub fn run(
        &self,
        u0: &SpectralField,
        record: NoiseRecord,
        observer: &mut dyn FnMut(&StepEvent),
    ) -> Result<Trajectory, IntegratorError> {
        self.check_record(&record)?;
        let guard = self.scheme.guard_for(u0);
        let cfg = self.ops.config();
        let eps = 1e-9 * record.dt;
        let mut times = Vec::with_capacity(self.output_times.len());
        let mut states = Vec::with_capacity(self.output_times.len());
        let mut next_out = 0;
        let mut u = u0.clone();
        let mut status = Status::Completed;
        let mut grid_index = 0usize;
        let steps = record.steps();
        for seg in &record.segments {
            let end_time = match seg.end_jump {
                Some(j) => record.jump_times[j],
                None => {
                    grid_index += 1;
                    if grid_index == steps {
                        self.horizon
                    } else {
                        grid_index as f64 * record.dt
                    }
                }
            };
            while next_out < self.output_times.len() && self.output_times[next_out] < end_time - eps {
                times.push(self.output_times[next_out]);
                states.push(u.clone());
                next_out += 1;
            }
            let jump = seg.end_jump.map(|j| (j, record.jump_times[j], record.marks[j]));
            let next = self.substep(&u, seg.start, seg.len, &seg.dw, jump, observer)?;
            let n = next.norm_h();
            u = next;
            if !(n <= guard) {
                status = Status::GuardTripped { time: end_time };
                times.push(end_time);
                states.push(u.clone());
                break;
            }
        }
        if status == Status::Completed {
            while next_out < self.output_times.len() {
                times.push(self.output_times[next_out]);
                states.push(u.clone());
                next_out += 1;
            }
        }
        let basis = self.basis();
        Ok(Trajectory {
            d: basis.dim(),
            n: basis.cutoff(),
            r: cfg.r,
            mu: cfg.mu,
            beta: cfg.effective_beta(),
            horizon: self.horizon,
            dt: record.dt,
            times,
            states,
            record: Some(record),
            status,
        })
    }

    /// Single base step without noise from an explicit state.
    pub fn step(&self, state: &SdeState, dw: &[f64], jumps: &[(f64, f64)]) -> Result<SdeState, IntegratorError> {
        let dt = self.scheme.dt;
        let mut u = state.u.clone();
        let mut t = state.t;
        let t_end = state.t + dt;
        let dof = dw.len();
        let mut rem: Vec<f64> = dw.to_vec();
        for (i, &(tau, z)) in jumps.iter().enumerate() {
            if tau < t || tau >= t_end {
                return Err(IntegratorError::Invalid(format!("jump at {tau} outside step [{t}, {t_end})")));
            }
            // split the increment proportionally to elapsed time
            let frac = (tau - t) / (t_end - t);
            let part: Vec<f64> = rem.iter().map(|x| x * frac).collect();
            for k in 0..dof {
                rem[k] -= part[k];
            }
            u = self.substep(&u, t, tau - t, &part, Some((i, tau, z)), &mut |_| {})?;
            t = tau;
        }
        u = self.substep(&u, t, t_end - t, &rem, None, &mut |_| {})?;
        Ok(SdeState {
            u,
            t: t_end,
            steps: state.steps + 1,
        })
    }
}
