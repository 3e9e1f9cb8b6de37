//! Run configuration: a TOML document with fixed sections.
//!
//! ```toml
//! [model]
//! d = 2
//! n = 8
//! r = 3.0
//! mu = 1.0
//! beta = 1.0
//!
//! [time]
//! horizon = 1.0
//! dt = 0.001
//!
//! [noise]
//! sigma_amplitude = 0.5
//! intensity = 2.0
//! gamma_c0 = 0.3
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, BasisIndex, WaveVector};
use crate::error::ConfigError;
use crate::field::SpectralField;
use crate::integrator::{uniform_outputs, SchemeKind, Simulation, StepScheme};
use crate::noise::{
    step_count, Direction, GammaFamily, JumpSpec, MarkLaw, NoiseModel, QSpectrum, SigmaFamily, SigmaKind,
};
use crate::operators::{Dealias, OperatorConfig, Operators};
use crate::rng::{Channel, StreamKey};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub d: usize,
    pub n: usize,
    pub r: f64,
    pub mu: f64,
    pub beta: f64,
    pub dealias: Dealias,
    pub padding: f64,
    pub convection: bool,
    pub absorption: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            d: 2,
            n: 8,
            r: 3.0,
            mu: 1.0,
            beta: 1.0,
            dealias: Dealias::PaddedCollocation,
            padding: 1.5,
            convection: true,
            absorption: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub horizon: f64,
    pub dt: f64,
    /// Number of equal output intervals on `[0, T]`.
    pub outputs: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            dt: 1.0 / 256.0,
            outputs: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Zero,
    TaylorGreen,
    Shear,
    /// Random Hermitian field drawn from the run seed.
    Random,
    /// Coefficients read from a CSV file (`k1,k2,k3,pol,re,im`).
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub preset: Preset,
    /// Target `‖u₀‖_H` (ignored for `zero` and `file`).
    pub amplitude: f64,
    /// Spectral decay exponent for `random`.
    pub decay: f64,
    pub path: Option<String>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            preset: Preset::TaylorGreen,
            amplitude: 1.0,
            decay: 2.0,
            path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkLawKind {
    Uniform,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub q_c: f64,
    pub q_s: f64,
    pub sigma: SigmaKind,
    pub sigma_amplitude: f64,
    pub sigma_rho: f64,
    pub intensity: f64,
    pub mark_law: MarkLawKind,
    pub mark_low: f64,
    pub mark_high: f64,
    pub mark_mean: f64,
    pub mark_std: f64,
    pub gamma_c0: f64,
    pub gamma_c1: f64,
    pub direction: Direction,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            q_c: 1.0,
            q_s: 2.0,
            sigma: SigmaKind::Additive,
            sigma_amplitude: 0.0,
            sigma_rho: 0.0,
            intensity: 0.0,
            mark_law: MarkLawKind::Uniform,
            mark_low: -1.0,
            mark_high: 1.0,
            mark_mean: 0.0,
            mark_std: 1.0,
            gamma_c0: 0.0,
            gamma_c1: 0.0,
            direction: Direction::Shear,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    pub taming: bool,
    pub guard: Option<f64>,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            kind: SchemeKind::TamedExplicit,
            taming: true,
            guard: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub ensemble: usize,
    /// Galerkin cutoffs for the self-convergence study.
    pub cutoffs: Vec<usize>,
    /// Number of dt halvings in the time-refinement study.
    pub dt_levels: usize,
    /// Initial separation of twin runs.
    pub delta: f64,
    /// Seeds in the uniqueness study.
    pub twins: usize,
    /// Refuse parameters outside the pathwise uniqueness regime.
    pub uniqueness: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            ensemble: 1000,
            cutoffs: vec![4, 8, 16, 32],
            dt_levels: 5,
            delta: 1e-6,
            twins: 100,
            uniqueness: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    /// Relative slack allowed for time-discretization effects.
    pub scheme: f64,
    /// Width of statistical acceptance bands in standard errors.
    pub std_errors: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            scheme: 0.05,
            std_errors: 3.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    pub noise: NoiseSection,
    pub scheme: SchemeSection,
    pub run: RunSection,
    pub tolerances: ToleranceSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn constraint(field: &str, rule: &str, value: impl ToString) -> ConfigError {
    ConfigError::Constraint {
        field: field.to_string(),
        rule: rule.to_string(),
        value: value.to_string(),
    }
}

/// Parse and validate a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        let msg = e.message().to_string();
        if let Some(rest) = msg.strip_prefix("unknown field `") {
            let key = rest.split('`').next().unwrap_or("").to_string();
            ConfigError::UnknownKey { line, key }
        } else if msg.contains("invalid type") || msg.contains("unknown variant") {
            ConfigError::TypeMismatch { line, message: msg }
        } else {
            ConfigError::Syntax { line, message: msg }
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.d != 2 && m.d != 3 {
            return Err(constraint("d", "d in {2, 3}", m.d));
        }
        if m.n < 1 || m.n > 64 {
            return Err(constraint("n", "1 <= n <= 64", m.n));
        }
        if !(m.r >= 1.0) || !m.r.is_finite() {
            return Err(constraint("r", "r >= 1", m.r));
        }
        if !(m.mu > 0.0) || !m.mu.is_finite() {
            return Err(constraint("mu", "mu > 0", m.mu));
        }
        if !(m.beta > 0.0) || !m.beta.is_finite() {
            return Err(constraint("beta", "beta > 0", m.beta));
        }
        if !(m.padding >= 1.5) {
            return Err(constraint("padding", "padding >= 3/2", m.padding));
        }
        let t = &self.time;
        if !(t.horizon >= 0.0) || !t.horizon.is_finite() {
            return Err(constraint("horizon", "horizon >= 0", t.horizon));
        }
        if !(t.dt > 0.0) || !t.dt.is_finite() {
            return Err(constraint("dt", "dt > 0", t.dt));
        }
        if step_count(t.horizon, t.dt).is_err() {
            return Err(constraint("dt", "horizon / dt is an integer", t.dt));
        }
        let i = &self.initial;
        if !(i.amplitude >= 0.0) || !i.amplitude.is_finite() {
            return Err(constraint("amplitude", "amplitude >= 0", i.amplitude));
        }
        if i.preset == Preset::File && i.path.is_none() {
            return Err(constraint("path", "path given when preset = \"file\"", "none"));
        }
        let z = &self.noise;
        if !(z.q_c >= 0.0) {
            return Err(constraint("q_c", "q_c >= 0", z.q_c));
        }
        if !(2.0 * z.q_s > m.d as f64) {
            return Err(constraint("q_s", "2 q_s > d", z.q_s));
        }
        if !z.sigma_amplitude.is_finite() {
            return Err(constraint("sigma_amplitude", "finite", z.sigma_amplitude));
        }
        if !(z.sigma_rho >= 0.0) {
            return Err(constraint("sigma_rho", "sigma_rho >= 0", z.sigma_rho));
        }
        if !(z.intensity >= 0.0) || !z.intensity.is_finite() {
            return Err(constraint("intensity", "intensity >= 0", z.intensity));
        }
        match z.mark_law {
            MarkLawKind::Uniform if !(z.mark_low < z.mark_high) => {
                return Err(constraint("mark_high", "mark_low < mark_high", z.mark_high));
            }
            MarkLawKind::Gaussian if !(z.mark_std >= 0.0) => {
                return Err(constraint("mark_std", "mark_std >= 0", z.mark_std));
            }
            _ => {}
        }
        if !(z.gamma_c0 >= 0.0) {
            return Err(constraint("gamma_c0", "gamma_c0 >= 0", z.gamma_c0));
        }
        if !(z.gamma_c1 >= 0.0) {
            return Err(constraint("gamma_c1", "gamma_c1 >= 0", z.gamma_c1));
        }
        if let Some(g) = self.scheme.guard {
            if !(g > 0.0) {
                return Err(constraint("guard", "guard > 0", g));
            }
        }
        let r = &self.run;
        if r.ensemble < 1 {
            return Err(constraint("ensemble", "ensemble >= 1", r.ensemble));
        }
        if r.cutoffs.is_empty() || r.cutoffs.windows(2).any(|w| w[0] >= w[1]) || r.cutoffs[0] < 1 {
            return Err(constraint("cutoffs", "strictly increasing, positive", format!("{:?}", r.cutoffs)));
        }
        if !(r.delta >= 0.0) {
            return Err(constraint("delta", "delta >= 0", r.delta));
        }
        if !(self.tolerances.scheme >= 0.0) {
            return Err(constraint("scheme", "scheme >= 0", self.tolerances.scheme));
        }
        if r.uniqueness {
            self.check_uniqueness_regime()?;
        }
        Ok(())
    }

    /// Pathwise uniqueness holds for `d = 2` and any `r`, and for `d = 3`
    /// with `r > 3`, or `r = 3` and `2βμ ≥ 1`.
    pub fn check_uniqueness_regime(&self) -> Result<(), ConfigError> {
        uniqueness_regime(self.model.d, self.model.r, self.model.mu, self.model.beta)
    }

    pub fn operator_config(&self) -> OperatorConfig {
        OperatorConfig {
            r: self.model.r,
            mu: self.model.mu,
            beta: self.model.beta,
            dealias: self.model.dealias,
            padding: self.model.padding,
            convection: self.model.convection,
            absorption: self.model.absorption,
        }
    }

    pub fn mark_law(&self) -> MarkLaw {
        match self.noise.mark_law {
            MarkLawKind::Uniform => MarkLaw::Uniform {
                low: self.noise.mark_low,
                high: self.noise.mark_high,
            },
            MarkLawKind::Gaussian => MarkLaw::Gaussian {
                mean: self.noise.mark_mean,
                std: self.noise.mark_std,
            },
        }
    }

    pub fn basis(&self) -> Result<Arc<BasisIndex>, ConfigError> {
        build_basis(self.model.d, self.model.n)
            .map(Arc::new)
            .map_err(|e| constraint("n", "valid basis", e))
    }

    pub fn noise_model(&self, basis: &Arc<BasisIndex>) -> Result<NoiseModel, ConfigError> {
        let z = &self.noise;
        let needs_direction = z.intensity > 0.0 && (z.gamma_c0 > 0.0 || z.gamma_c1 > 0.0);
        let direction = match z.direction.build(basis) {
            Ok(g) => g,
            Err(e) if needs_direction => return Err(constraint("direction", "direction has modes in the basis", e)),
            Err(_) => SpectralField::zeros(basis),
        };
        let gamma = GammaFamily::new(z.gamma_c0, z.gamma_c1, direction)
            .map_err(|e| constraint("gamma_c0", "valid jump coefficient", e))?;
        NoiseModel::new(
            basis,
            QSpectrum { c: z.q_c, s: z.q_s },
            SigmaFamily {
                kind: z.sigma,
                amplitude: z.sigma_amplitude,
                rho: z.sigma_rho,
            },
            JumpSpec {
                intensity: z.intensity,
                law: self.mark_law(),
            },
            gamma,
        )
        .map_err(|e| constraint("noise", "valid noise model", e))
    }

    pub fn step_scheme(&self) -> StepScheme {
        StepScheme {
            kind: self.scheme.kind,
            dt: self.time.dt,
            taming: self.scheme.taming,
            guard: self.scheme.guard,
        }
    }

    pub fn output_times(&self) -> Vec<f64> {
        uniform_outputs(self.time.horizon, self.time.outputs)
    }

    /// Operators, noise and scheme for this configuration.
    pub fn build(&self) -> Result<Simulation, ConfigError> {
        self.validate()?;
        let basis = self.basis()?;
        let ops = Operators::new(&basis, self.operator_config())
            .map_err(|e| constraint("model", "valid operator configuration", e))?;
        let noise = self.noise_model(&basis)?;
        Simulation::new(
            ops,
            noise,
            self.step_scheme(),
            self.time.horizon,
            self.output_times(),
            self.run.seed,
        )
        .map_err(|e| constraint("time", "valid time grid", e))
    }

    /// `Π_n u₀` for the configured preset.
    pub fn initial_state(&self, basis: &Arc<BasisIndex>) -> Result<SpectralField, ConfigError> {
        let i = &self.initial;
        let shape = match i.preset {
            Preset::Zero => return Ok(SpectralField::zeros(basis)),
            Preset::File => {
                let path = i.path.as_deref().unwrap_or_default();
                return read_coefficients(path, basis);
            }
            Preset::TaylorGreen => {
                crate::noise::taylor_green(basis).map_err(|e| ConfigError::Initial(e.to_string()))?
            }
            Preset::Shear => match basis.find(&WaveVector([1, 0, 0])) {
                Some(w) => SpectralField::single_mode(basis, w, 0, 1.0),
                None => SpectralField::zeros(basis),
            },
            Preset::Random => {
                let mut rng = StreamKey::new(self.run.seed, u64::MAX).stream(Channel::Auxiliary, 0);
                SpectralField::random(basis, &mut rng, i.decay)
            }
        };
        let norm = shape.norm_h();
        if norm == 0.0 {
            if i.amplitude == 0.0 {
                return Ok(shape);
            }
            return Err(ConfigError::Initial(format!(
                "preset {:?} has no modes below cutoff {}",
                i.preset,
                basis.cutoff()
            )));
        }
        Ok(shape.scaled(i.amplitude / norm))
    }
}

/// Regime check shared by the configuration and the uniqueness study.
pub fn uniqueness_regime(d: usize, r: f64, mu: f64, beta: f64) -> Result<(), ConfigError> {
    if d == 3 && r < 3.0 {
        return Err(ConfigError::Regime(format!(
            "d = 3 requires r >= 3 for pathwise uniqueness (got r = {r})"
        )));
    }
    if d == 3 && r == 3.0 && 2.0 * beta * mu < 1.0 {
        return Err(ConfigError::Regime(format!(
            "r = 3 in d = 3 requires 2βμ ≥ 1 for r = 3 (got 2βμ = {})",
            2.0 * beta * mu
        )));
    }
    Ok(())
}

/// Read `k1,k2,k3,pol,re,im` rows; coefficients outside the basis are
/// dropped and the result is Hermitian-symmetrized.
pub fn read_coefficients(path: &str, basis: &Arc<BasisIndex>) -> Result<SpectralField, ConfigError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ConfigError::Initial(format!("{path}: {e}")))?;
    let mut f = SpectralField::zeros(basis);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ConfigError::Initial(format!("{path}: {e}")))?;
        let bad = || ConfigError::Initial(format!("{path}: malformed row {}", line + 2));
        if rec.len() != 6 {
            return Err(bad());
        }
        let int = |i: usize| rec[i].parse::<i32>().map_err(|_| bad());
        let flt = |i: usize| rec[i].parse::<f64>().map_err(|_| bad());
        let k = WaveVector([int(0)?, int(1)?, int(2)?]);
        let pol = int(3)? as usize;
        if pol >= basis.npol() {
            return Err(bad());
        }
        if let Some(w) = basis.find(&k) {
            let c = num_complex::Complex64::new(flt(4)?, flt(5)?);
            f.coeffs_mut()[basis.mode_index(w, pol)] = c;
            f.coeffs_mut()[basis.mode_index(basis.conj_wave(w), pol)] = c.conj();
        }
    }
    Ok(f)
}

/// Seeded generator for property-suite corpora; stream 0 of the
/// auxiliary channel is reserved for random initial data.
pub fn auxiliary_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    StreamKey::new(seed, u64::MAX).stream(Channel::Auxiliary, stream + 1)
}
