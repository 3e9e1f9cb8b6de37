//! Q-Wiener and compound Poisson forcing.
//!
//! The Wiener process is expanded in the real orthonormal system
//! `√2 p cos(k·x)`, `√2 p sin(k·x)` over canonical wavevectors. Each real
//! coordinate has variance `μ_k dt`, so `E‖ΔW‖²_H = dt Σ μ_k` where the sum
//! runs over all complex modes (both members of every conjugate pair).
//!
//! Jump coefficients are separable, `γ(u, z) = G(u) h(z) g` with `h(z) = z`
//! and `‖g‖_H = 1`, which gives closed-form compensators and moments.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisIndex, WaveVector};
use crate::error::NoiseError;
use crate::field::{PhysicalField, SpectralField};
use crate::rng::{mode_key, Channel, StreamKey};
use crate::transform::Grid;

fn invalid(field: &str, rule: &str, value: impl ToString) -> NoiseError {
    NoiseError::Invalid {
        field: field.to_string(),
        rule: rule.to_string(),
        value: value.to_string(),
    }
}

/// Covariance eigenvalues `μ_k = c |k|^{-2s}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSpectrum {
    pub c: f64,
    pub s: f64,
}

impl QSpectrum {
    pub fn new(c: f64, s: f64, dim: usize) -> Result<Self, NoiseError> {
        let q = Self { c, s };
        q.validate(dim)?;
        Ok(q)
    }

    pub fn validate(&self, dim: usize) -> Result<(), NoiseError> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(invalid("q_c", "c >= 0", self.c));
        }
        if !(2.0 * self.s > dim as f64) {
            return Err(invalid("q_s", "2s > d", self.s));
        }
        Ok(())
    }

    pub fn weight(&self, norm_sq: f64) -> f64 {
        self.c * norm_sq.powf(-self.s)
    }

    /// `Tr Q` restricted to the basis.
    pub fn trace(&self, basis: &BasisIndex) -> f64 {
        (0..basis.num_modes()).map(|i| self.weight(basis.mode_norm_sq(i))).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum MarkLaw {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl MarkLaw {
    pub fn validate(&self) -> Result<(), NoiseError> {
        match *self {
            MarkLaw::Uniform { low, high } => {
                if !(low < high) || !low.is_finite() || !high.is_finite() {
                    return Err(invalid("mark_low", "mark_low < mark_high", format!("[{low}, {high}]")));
                }
            }
            MarkLaw::Gaussian { mean, std } => {
                if !(std >= 0.0) || !mean.is_finite() || !std.is_finite() {
                    return Err(invalid("mark_std", "mark_std >= 0", std));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarkLaw::Uniform { low, high } => Uniform::new(low, high).expect("validated bounds").sample(rng),
            MarkLaw::Gaussian { mean, std } => Normal::new(mean, std).expect("validated std").sample(rng),
        }
    }

    /// `E Z^p` for `p ∈ {1, 2, 4}` (any non-negative integer for uniform).
    pub fn raw_moment(&self, p: u32) -> f64 {
        match *self {
            MarkLaw::Uniform { low, high } => {
                let k = p as i32 + 1;
                (high.powi(k) - low.powi(k)) / (k as f64 * (high - low))
            }
            MarkLaw::Gaussian { mean: m, std: s } => match p {
                0 => 1.0,
                1 => m,
                2 => m * m + s * s,
                3 => m.powi(3) + 3.0 * m * s * s,
                4 => m.powi(4) + 6.0 * m * m * s * s + 3.0 * s.powi(4),
                _ => panic!("Gaussian raw moment of order {p} not provided"),
            },
        }
    }
}

/// Finite jump intensity with a mark law on `ℝ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub intensity: f64,
    pub law: MarkLaw,
}

impl JumpSpec {
    pub fn none() -> Self {
        Self {
            intensity: 0.0,
            law: MarkLaw::Uniform { low: 0.0, high: 1.0 },
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.intensity >= 0.0) || !self.intensity.is_finite() {
            return Err(invalid("intensity", "intensity >= 0", self.intensity));
        }
        self.law.validate()
    }

    /// `∫ h(z)^p λ(dz)` with `h(z) = z`.
    pub fn mark_moment(&self, p: u32) -> f64 {
        self.intensity * self.law.raw_moment(p)
    }

    pub fn m1(&self) -> f64 {
        self.mark_moment(1)
    }

    pub fn m2(&self) -> f64 {
        self.mark_moment(2)
    }

    pub fn m4(&self) -> f64 {
        self.mark_moment(4)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaKind {
    Additive,
    BoundedMultiplicative,
    /// Amplitude growing like `‖u‖²_H`; violates the growth condition and
    /// exists to exercise certification.
    Quadratic,
}

/// Diagonal diffusion coefficient `σ(u) e_k = a · f(‖u‖_H) e_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaFamily {
    pub kind: SigmaKind,
    pub amplitude: f64,
    pub rho: f64,
}

impl SigmaFamily {
    pub fn zero() -> Self {
        Self {
            kind: SigmaKind::Additive,
            amplitude: 0.0,
            rho: 0.0,
        }
    }

    pub fn additive(amplitude: f64) -> Self {
        Self {
            kind: SigmaKind::Additive,
            amplitude,
            rho: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !self.amplitude.is_finite() {
            return Err(invalid("sigma_amplitude", "finite", self.amplitude));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(invalid("sigma_rho", "sigma_rho >= 0", self.rho));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    /// State-dependent factor multiplying the base amplitude.
    pub fn modulation(&self, norm_h: f64) -> f64 {
        match self.kind {
            SigmaKind::Additive => 1.0,
            SigmaKind::BoundedMultiplicative => 1.0 + self.rho * norm_h / (1.0 + norm_h),
            SigmaKind::Quadratic => 1.0 + self.rho * norm_h * norm_h,
        }
    }

    /// `σ(u) ΔW`.
    pub fn diffusion_increment(&self, u: &SpectralField, dw: &SpectralField) -> SpectralField {
        self.diffusion_increment_at(u.norm_h(), dw)
    }

    pub fn diffusion_increment_at(&self, norm_h: f64, dw: &SpectralField) -> SpectralField {
        dw.scaled(self.amplitude * self.modulation(norm_h))
    }

    /// `‖σ(u)‖²_{L_Q} = f(‖u‖)² a² Tr Q`.
    pub fn lq_norm_sq(&self, norm_h: f64, trace_q: f64) -> f64 {
        let f = self.amplitude * self.modulation(norm_h);
        f * f * trace_q
    }
}

/// Named unit-norm direction fields for the jump coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Single mode `√2 p cos(x₁)`.
    Shear,
    /// Taylor–Green vortex, normalized.
    TaylorGreen,
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::Shear => "shear",
            Direction::TaylorGreen => "taylor-green",
        }
    }

    pub fn build(&self, basis: &Arc<BasisIndex>) -> Result<SpectralField, NoiseError> {
        let f = match self {
            Direction::Shear => match basis.find(&WaveVector([1, 0, 0])) {
                Some(w) => SpectralField::single_mode(basis, w, 0, 1.0),
                None => SpectralField::zeros(basis),
            },
            Direction::TaylorGreen => taylor_green(basis)?,
        };
        let norm = f.norm_h();
        if norm == 0.0 {
            return Err(NoiseError::EmptyDirection {
                name: self.name().to_string(),
                n: basis.cutoff(),
            });
        }
        Ok(f.scaled(1.0 / norm))
    }
}

/// `(sin x cos y [cos z], -cos x sin y [cos z], 0)` projected onto the basis.
pub fn taylor_green(basis: &Arc<BasisIndex>) -> Result<SpectralField, NoiseError> {
    let d = basis.dim();
    let size = crate::transform::min_grid_size(basis).max(4);
    let grid = Grid::new(d, size);
    let mut f = PhysicalField::zeros(d, size);
    let h = 2.0 * std::f64::consts::PI / size as f64;
    for idx in 0..f.points() {
        let mut rem = idx;
        let mut x = [0.0; 3];
        for a in (0..d).rev() {
            x[a] = h * (rem % size) as f64;
            rem /= size;
        }
        let cz = if d == 3 { x[2].cos() } else { 1.0 };
        f.components[0][idx] = x[0].sin() * x[1].cos() * cz;
        f.components[1][idx] = -x[0].cos() * x[1].sin() * cz;
    }
    Ok(grid.to_spectral(&f, basis)?)
}

/// `γ(u, z) = G(u) z g` with `G(u) = c₀ + c₁ ‖u‖/(1 + ‖u‖)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaFamily {
    pub c0: f64,
    pub c1: f64,
    pub direction: SpectralField,
}

impl GammaFamily {
    pub fn new(c0: f64, c1: f64, direction: SpectralField) -> Result<Self, NoiseError> {
        if !(c0 >= 0.0) || !c0.is_finite() {
            return Err(invalid("gamma_c0", "gamma_c0 >= 0", c0));
        }
        if !(c1 >= 0.0) || !c1.is_finite() {
            return Err(invalid("gamma_c1", "gamma_c1 >= 0", c1));
        }
        Ok(Self { c0, c1, direction })
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.c1 == 0.0
    }

    pub fn amplitude(&self, norm_h: f64) -> f64 {
        self.c0 + self.c1 * norm_h / (1.0 + norm_h)
    }

    pub fn jump_increment(&self, u: &SpectralField, z: f64) -> SpectralField {
        self.jump_increment_at(u.norm_h(), z)
    }

    pub fn jump_increment_at(&self, norm_h: f64, z: f64) -> SpectralField {
        self.direction.scaled(self.amplitude(norm_h) * z)
    }

    /// `∫ γ(u, z) λ(dz) = G(u) m₁ g`.
    pub fn compensator_drift(&self, u: &SpectralField, jumps: &JumpSpec) -> SpectralField {
        self.compensator_drift_at(u.norm_h(), jumps)
    }

    pub fn compensator_drift_at(&self, norm_h: f64, jumps: &JumpSpec) -> SpectralField {
        self.direction.scaled(self.amplitude(norm_h) * jumps.m1())
    }
}

/// Constants of the growth, moment and Lipschitz conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub k1: f64,
    pub k2: f64,
    pub l: f64,
}

/// Complete forcing description on one basis.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub basis: Arc<BasisIndex>,
    pub q: QSpectrum,
    pub sigma: SigmaFamily,
    pub jumps: JumpSpec,
    pub gamma: GammaFamily,
    trace_q: f64,
    dofs: DofMap,
}

impl NoiseModel {
    pub fn new(
        basis: &Arc<BasisIndex>,
        q: QSpectrum,
        sigma: SigmaFamily,
        jumps: JumpSpec,
        gamma: GammaFamily,
    ) -> Result<Self, NoiseError> {
        q.validate(basis.dim())?;
        sigma.validate()?;
        jumps.validate()?;
        Ok(Self {
            basis: Arc::clone(basis),
            trace_q: q.trace(basis),
            dofs: DofMap::new(basis, &q),
            q,
            sigma,
            jumps,
            gamma,
        })
    }

    /// No forcing at all.
    pub fn silent(basis: &Arc<BasisIndex>) -> Self {
        Self::new(
            basis,
            QSpectrum { c: 0.0, s: 2.0 },
            SigmaFamily::zero(),
            JumpSpec::none(),
            GammaFamily {
                c0: 0.0,
                c1: 0.0,
                direction: SpectralField::zeros(basis),
            },
        )
        .expect("silent noise is valid")
    }

    pub fn trace_q(&self) -> f64 {
        self.trace_q
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// `S = a² Tr Q`.
    pub fn sigma_scale(&self) -> f64 {
        self.sigma.amplitude * self.sigma.amplitude * self.trace_q
    }

    pub fn sigma_lq_sq(&self, norm_h: f64) -> f64 {
        self.sigma.lq_norm_sq(norm_h, self.trace_q)
    }

    /// `∫ ‖γ(u, z)‖²_H λ(dz)`.
    pub fn gamma_second_moment(&self, norm_h: f64) -> f64 {
        let g = self.gamma.amplitude(norm_h);
        g * g * self.jumps.m2()
    }

    /// Declared constants for the built-in families. For the quadratic
    /// family these are the bounded-family values, which it exceeds.
    pub fn declared_constants(&self) -> HypothesisConstants {
        let s = self.sigma_scale();
        let rho = self.sigma.rho;
        let f_max = match self.sigma.kind {
            SigmaKind::Additive => 1.0,
            SigmaKind::BoundedMultiplicative | SigmaKind::Quadratic => 1.0 + rho,
        };
        let lip = match self.sigma.kind {
            SigmaKind::Additive => 0.0,
            SigmaKind::BoundedMultiplicative | SigmaKind::Quadratic => rho,
        };
        let gmax = self.gamma.c0 + self.gamma.c1;
        HypothesisConstants {
            k1: s * f_max * f_max + gmax * gmax * self.jumps.m2(),
            k2: gmax.powi(4) * self.jumps.m4(),
            l: lip * lip * s + self.gamma.c1 * self.gamma.c1 * self.jumps.m2(),
        }
    }

    pub fn wiener_is_active(&self) -> bool {
        !self.sigma.is_zero() && self.trace_q > 0.0
    }

    pub fn jumps_are_active(&self) -> bool {
        self.jumps.intensity > 0.0
    }
}

/// Real Wiener coordinates: for every canonical wavevector (basis order)
/// and polarization, a cosine then a sine coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    entries: Vec<(usize, usize)>,
    conj: Vec<usize>,
    keys: Vec<u64>,
    sd: Vec<f64>,
}

impl DofMap {
    pub fn new(basis: &BasisIndex, q: &QSpectrum) -> Self {
        let mut entries = Vec::new();
        let mut conj = Vec::new();
        let mut keys = Vec::new();
        let mut sd = Vec::new();
        for w in basis.canonical_waves() {
            let k = basis.wave(w);
            let mu = q.weight(basis.wave_norm_sq(w));
            for p in 0..basis.npol() {
                entries.push((w, p));
                conj.push(basis.conj_wave(w));
                for part in 0..2 {
                    keys.push(mode_key(&k, p, part));
                    sd.push(mu.sqrt());
                }
            }
        }
        Self {
            entries,
            conj,
            keys,
            sd,
        }
    }

    /// Number of real coordinates (equal to the complex mode count).
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, i: usize) -> u64 {
        self.keys[i]
    }

    /// Wavevector index and polarization driven by coordinate `i`.
    pub fn mode_of(&self, i: usize) -> (usize, usize) {
        self.entries[i / 2]
    }

    /// `√μ_k` of coordinate `i`.
    pub fn std_dev(&self, i: usize) -> f64 {
        self.sd[i]
    }

    /// Spectral field with the given real coordinates.
    pub fn to_field(&self, basis: &Arc<BasisIndex>, x: &[f64]) -> SpectralField {
        let mut f = SpectralField::zeros(basis);
        let np = basis.npol();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let c = f.coeffs_mut();
        for (e, &(w, p)) in self.entries.iter().enumerate() {
            let v = Complex64::new(x[2 * e] * r, -x[2 * e + 1] * r);
            c[w * np + p] = v;
            c[self.conj[e] * np + p] = v.conj();
        }
        f
    }

    /// Inverse of [`DofMap::to_field`] on Hermitian fields.
    pub fn coordinates(&self, f: &SpectralField) -> Vec<f64> {
        let np = f.basis().npol();
        let s2 = std::f64::consts::SQRT_2;
        let mut x = vec![0.0; self.len()];
        for (e, &(w, p)) in self.entries.iter().enumerate() {
            let c = f.coeffs()[w * np + p];
            x[2 * e] = s2 * c.re;
            x[2 * e + 1] = -s2 * c.im;
        }
        x
    }
}

/// One Wiener increment drawn from a single stream (all coordinates in
/// order).
pub fn sample_wiener_increment<R: Rng + ?Sized>(
    basis: &Arc<BasisIndex>,
    q: &QSpectrum,
    dt: f64,
    rng: &mut R,
) -> SpectralField {
    let dofs = DofMap::new(basis, q);
    let sq = dt.sqrt();
    let x: Vec<f64> = (0..dofs.len())
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            z * dofs.std_dev(i) * sq
        })
        .collect();
    dofs.to_field(basis, &x)
}

/// Jump times (sorted, uniform on `[0, T)`) and marks of a compound
/// Poisson process.
pub fn sample_jumps<R: Rng + ?Sized, S: Rng + ?Sized>(
    spec: &JumpSpec,
    horizon: f64,
    times_rng: &mut R,
    marks_rng: &mut S,
) -> (Vec<f64>, Vec<f64>) {
    let mean = spec.intensity * horizon;
    if !(mean > 0.0) {
        return (Vec::new(), Vec::new());
    }
    let count: f64 = Poisson::new(mean).expect("positive mean").sample(times_rng);
    let count = count as usize;
    let mut times: Vec<f64> = (0..count).map(|_| times_rng.random::<f64>() * horizon).collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            times[i] = times[i - 1].next_up();
        }
    }
    let marks = (0..count).map(|_| spec.law.sample(marks_rng)).collect();
    (times, marks)
}

/// No jump ends this segment.
pub const NO_JUMP: u64 = u64::MAX;

/// Piece of the integration grid between consecutive grid points or jump
/// times, with the Wiener increment realized over it.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub len: f64,
    /// Index of the jump arriving at `start + len`, if any.
    pub end_jump: Option<usize>,
    /// Real Wiener coordinates of the increment; empty when the Wiener
    /// part is inactive.
    pub dw: Vec<f64>,
}

/// Every random input of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRecord {
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub horizon: f64,
    pub dof: usize,
    pub segments: Vec<Segment>,
    pub jump_times: Vec<f64>,
    pub marks: Vec<f64>,
}

/// Number of base steps, requiring `T / dt` to be an integer.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize, NoiseError> {
    if horizon == 0.0 {
        return Ok(0);
    }
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(NoiseError::NonIntegerSteps { horizon, dt });
    }
    let ratio = horizon / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * n.max(1.0) || n < 1.0 {
        return Err(NoiseError::NonIntegerSteps { horizon, dt });
    }
    Ok(n as usize)
}

impl NoiseRecord {
    /// Draws Wiener increments per base step from mode-keyed streams, then
    /// splits steps containing jumps with Brownian bridges. Grid-point
    /// values of the Wiener path therefore do not depend on the jumps.
    pub fn sample(model: &NoiseModel, key: StreamKey, horizon: f64, dt: f64) -> Result<Self, NoiseError> {
        let steps = step_count(horizon, dt)?;
        let (jump_times, marks) = if model.jumps_are_active() && steps > 0 {
            sample_jumps(
                &model.jumps,
                horizon,
                &mut key.stream(Channel::JumpTimes, 0),
                &mut key.stream(Channel::Marks, 0),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        let dofs = model.dofs();
        let dof = if model.wiener_is_active() { dofs.len() } else { 0 };
        let sq = dt.sqrt();
        // base increments, step-major
        let mut base = vec![0.0; steps * dof];
        for i in 0..dof {
            let mut rng = key.stream(Channel::Wiener, dofs.key(i));
            let s = dofs.std_dev(i) * sq;
            for t in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                base[t * dof + i] = s * z;
            }
        }
        let mut bridges: Vec<_> = Vec::new();
        let mut segments = Vec::with_capacity(steps + jump_times.len());
        let mut next_jump = 0;
        for t in 0..steps {
            let t0 = t as f64 * dt;
            let t1 = if t + 1 == steps { horizon } else { (t + 1) as f64 * dt };
            let mut rem: Vec<f64> = base[t * dof..(t + 1) * dof].to_vec();
            let mut s = t0;
            while next_jump < jump_times.len() && (jump_times[next_jump] < t1 || t + 1 == steps) {
                let tau = jump_times[next_jump];
                if bridges.is_empty() && dof > 0 {
                    bridges = (0..dof).map(|i| key.stream(Channel::Bridge, dofs.key(i))).collect();
                }
                let a = tau - s;
                let b = t1 - tau;
                let mut inc = vec![0.0; dof];
                for i in 0..dof {
                    let z: f64 = bridges[i].sample(StandardNormal);
                    let var = dofs.std_dev(i).powi(2) * a * b / (a + b);
                    inc[i] = rem[i] * a / (a + b) + var.max(0.0).sqrt() * z;
                    rem[i] -= inc[i];
                }
                segments.push(Segment {
                    start: s,
                    len: a,
                    end_jump: Some(next_jump),
                    dw: inc,
                });
                s = tau;
                next_jump += 1;
            }
            segments.push(Segment {
                start: s,
                len: t1 - s,
                end_jump: None,
                dw: rem,
            });
        }
        Ok(Self {
            seed: key.seed,
            stream: key.trajectory,
            dt,
            horizon,
            dof,
            segments,
            jump_times,
            marks,
        })
    }

    pub fn steps(&self) -> usize {
        self.segments.iter().filter(|s| s.end_jump.is_none()).count()
    }

    /// Same path on a grid `factor` times coarser: Wiener increments are
    /// summed, jump times kept exactly.
    pub fn coarsen(&self, factor: usize) -> Result<NoiseRecord, NoiseError> {
        let steps = self.steps();
        if factor == 0 || !steps.is_multiple_of(factor) {
            return Err(NoiseError::BadCoarsening { steps, factor });
        }
        let dt = self.dt * factor as f64;
        let coarse_steps = steps / factor;
        let mut out = Vec::with_capacity(coarse_steps + self.jump_times.len());
        let mut acc = vec![0.0; self.dof];
        let mut start = 0.0;
        let mut fine_done = 0;
        for seg in &self.segments {
            for (a, x) in acc.iter_mut().zip(&seg.dw) {
                *a += x;
            }
            match seg.end_jump {
                Some(j) => {
                    let tau = self.jump_times[j];
                    out.push(Segment {
                        start,
                        len: tau - start,
                        end_jump: Some(j),
                        dw: std::mem::replace(&mut acc, vec![0.0; self.dof]),
                    });
                    start = tau;
                }
                None => {
                    fine_done += 1;
                    if fine_done % factor == 0 {
                        let c = fine_done / factor;
                        let end = if c == coarse_steps { self.horizon } else { c as f64 * dt };
                        out.push(Segment {
                            start,
                            len: end - start,
                            end_jump: None,
                            dw: std::mem::replace(&mut acc, vec![0.0; self.dof]),
                        });
                        start = end;
                    }
                }
            }
        }
        Ok(NoiseRecord {
            seed: self.seed,
            stream: self.stream,
            dt,
            horizon: self.horizon,
            dof: self.dof,
            segments: out,
            jump_times: self.jump_times.clone(),
            marks: self.marks.clone(),
        })
    }

    /// Total Wiener increment over `[0, T]` per real coordinate.
    pub fn total_increment(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dof];
        for s in &self.segments {
            for (a, x) in acc.iter_mut().zip(&s.dw) {
                *a += x;
            }
        }
        acc
    }

    /// Identical random inputs, compared bit for bit.
    pub fn bitwise_eq(&self, other: &NoiseRecord) -> bool {
        fn same(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        self.seed == other.seed
            && self.stream == other.stream
            && self.dt.to_bits() == other.dt.to_bits()
            && self.horizon.to_bits() == other.horizon.to_bits()
            && self.dof == other.dof
            && same(&self.jump_times, &other.jump_times)
            && same(&self.marks, &other.marks)
            && self.segments.len() == other.segments.len()
            && self.segments.iter().zip(&other.segments).all(|(a, b)| {
                a.start.to_bits() == b.start.to_bits()
                    && a.len.to_bits() == b.len.to_bits()
                    && a.end_jump == b.end_jump
                    && same(&a.dw, &b.dw)
            })
    }
}

/// Which condition a certification sample violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    Growth,
    Moment,
    Lipschitz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: Clause,
    /// Observed value divided by the declared bound.
    pub ratio: f64,
    /// `‖u‖_H` and `‖v‖_H` of the witness pair.
    pub witness: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub samples: usize,
    pub constants: HypothesisConstants,
    /// Worst observed value of each left side divided by its right side
    /// without the constant (the empirical constant).
    pub growth_max: f64,
    pub moment_max: f64,
    pub lipschitz_max: f64,
    pub growth_ratio: f64,
    pub moment_ratio: f64,
    pub lipschitz_ratio: f64,
    pub violations: Vec<Violation>,
    pub pass: bool,
}

/// Field pairs for certification, spanning `‖u‖_H ∈ [0, max_norm]`.
pub fn certification_corpus<R: Rng + ?Sized>(
    basis: &Arc<BasisIndex>,
    pairs: usize,
    max_norm: f64,
    rng: &mut R,
) -> Vec<(SpectralField, SpectralField)> {
    let unit = |rng: &mut R| {
        let f = SpectralField::random(basis, rng, 1.0);
        let n = f.norm_h();
        if n > 0.0 {
            f.scaled(1.0 / n)
        } else {
            f
        }
    };
    let mut out = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let t = if pairs > 1 { i as f64 / (pairs - 1) as f64 } else { 0.0 };
        let nu = max_norm * t;
        let u = unit(rng).scaled(nu);
        // mix independent partners with small perturbations
        let v = if i % 2 == 0 {
            let nv = max_norm * rng.random::<f64>();
            unit(rng).scaled(nv)
        } else {
            let eps = 10f64.powf(-6.0 * rng.random::<f64>());
            u.add(&unit(rng).scaled(eps))
        };
        out.push((u, v));
    }
    out
}

fn bound_ratio(value: f64, constant: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else if constant == 0.0 {
        f64::INFINITY
    } else {
        value / constant
    }
}

/// Empirical check of growth, `2p`-moment (`p = 2`) and Lipschitz
/// conditions against the model's declared constants.
pub fn certify_hypotheses(model: &NoiseModel, corpus: &[(SpectralField, SpectralField)]) -> CertReport {
    let c = model.declared_constants();
    let tol = 1.0 + 1e-6;
    let m2 = model.jumps.m2();
    let m4 = model.jumps.m4();
    let tq = model.trace_q();
    let a = model.sigma.amplitude;
    let mut rep = CertReport {
        samples: corpus.len(),
        constants: c,
        growth_max: 0.0,
        moment_max: 0.0,
        lipschitz_max: 0.0,
        growth_ratio: 0.0,
        moment_ratio: 0.0,
        lipschitz_ratio: 0.0,
        violations: Vec::new(),
        pass: true,
    };
    let mut worst: [Option<Violation>; 3] = [None, None, None];
    let note = |clause: Clause, ratio: f64, w: (f64, f64), slot: &mut Option<Violation>| {
        if ratio > tol && slot.as_ref().is_none_or(|v| ratio > v.ratio) {
            *slot = Some(Violation {
                clause,
                ratio,
                witness: w,
            });
        }
    };
    for (u, v) in corpus {
        let nu = u.norm_h();
        let nv = v.norm_h();
        let gu = model.gamma.amplitude(nu);
        let growth = (model.sigma_lq_sq(nu) + gu * gu * m2) / (1.0 + nu * nu);
        let moment = gu.powi(4) * m4 / (1.0 + nu.powi(4));
        let diff = u.sub(v).norm_h_sq();
        let lip = if diff > 0.0 {
            let ds = a * (model.sigma.modulation(nu) - model.sigma.modulation(nv));
            let dg = gu - model.gamma.amplitude(nv);
            (ds * ds * tq + dg * dg * m2) / diff
        } else {
            0.0
        };
        rep.growth_max = rep.growth_max.max(growth);
        rep.moment_max = rep.moment_max.max(moment);
        rep.lipschitz_max = rep.lipschitz_max.max(lip);
        let (g, m, l) = (bound_ratio(growth, c.k1), bound_ratio(moment, c.k2), bound_ratio(lip, c.l));
        rep.growth_ratio = rep.growth_ratio.max(g);
        rep.moment_ratio = rep.moment_ratio.max(m);
        rep.lipschitz_ratio = rep.lipschitz_ratio.max(l);
        let [wg, wm, wl] = &mut worst;
        note(Clause::Growth, g, (nu, nv), wg);
        note(Clause::Moment, m, (nu, nv), wm);
        note(Clause::Lipschitz, l, (nu, nv), wl);
    }
    rep.violations = worst.into_iter().flatten().collect();
    rep.pass = rep.violations.is_empty();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(basis: &Arc<BasisIndex>, sigma: SigmaFamily, lambda: f64, c0: f64, c1: f64) -> NoiseModel {
        let g = Direction::Shear.build(basis).unwrap();
        NoiseModel::new(
            basis,
            QSpectrum { c: 1.0, s: 1.5 },
            sigma,
            JumpSpec {
                intensity: lambda,
                law: MarkLaw::Uniform { low: -1.0, high: 2.0 },
            },
            GammaFamily::new(c0, c1, g).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn dof_coordinates_round_trip_and_norm() {
        let b = Arc::new(build_basis(3, 3).unwrap());
        let q = QSpectrum { c: 1.0, s: 2.0 };
        let m = DofMap::new(&b, &q);
        assert_eq!(m.len(), b.num_modes());
        let x: Vec<f64> = (0..m.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = m.to_field(&b, &x);
        assert!(f.hermitian_defect() == 0.0);
        let nx: f64 = x.iter().map(|v| v * v).sum();
        assert!((f.norm_h_sq() - nx).abs() < 1e-12);
        let back = m.coordinates(&f);
        for (a, c) in x.iter().zip(&back) {
            assert!((a - c).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_step_gives_zero_increment() {
        let b = Arc::new(build_basis(2, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = sample_wiener_increment(&b, &QSpectrum { c: 1.0, s: 1.5 }, 0.0, &mut rng);
        assert_eq!(w.max_abs(), 0.0);
    }

    #[test]
    fn mark_moments_closed_form() {
        let u = MarkLaw::Uniform { low: -1.0, high: 2.0 };
        assert!((u.raw_moment(1) - 0.5).abs() < 1e-15);
        assert!((u.raw_moment(2) - 1.0).abs() < 1e-15);
        assert!((u.raw_moment(4) - 33.0 / 15.0).abs() < 1e-14);
        let g = MarkLaw::Gaussian { mean: 1.0, std: 2.0 };
        assert_eq!(g.raw_moment(2), 5.0);
        assert_eq!(g.raw_moment(4), 1.0 + 24.0 + 48.0);
    }

    #[test]
    fn families_follow_hand_formulas() {
        let b = Arc::new(build_basis(2, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dw = SpectralField::random(&b, &mut rng, 1.0);
        let u1 = SpectralField::random(&b, &mut rng, 1.0);
        let u2 = u1.scaled(7.0);
        let add = SigmaFamily::additive(0.3);
        assert_eq!(add.diffusion_increment(&u1, &dw), add.diffusion_increment(&u2, &dw));
        let bm = SigmaFamily {
            kind: SigmaKind::BoundedMultiplicative,
            amplitude: 1.0,
            rho: 1.0,
        };
        let unit = u1.scaled(1.0 / u1.norm_h());
        let inc = bm.diffusion_increment(&unit, &dw);
        assert!(inc.sub(&dw.scaled(1.5)).max_abs() < 1e-15);
        let g = Direction::Shear.build(&b).unwrap();
        let gam = GammaFamily::new(1.0, 0.0, g.clone()).unwrap();
        let j = gam.jump_increment(&SpectralField::zeros(&b), 0.5);
        assert!(j.sub(&g.scaled(0.5)).max_abs() < 1e-15);
        let spec = JumpSpec {
            intensity: 2.0,
            law: MarkLaw::Uniform { low: 0.5, high: 1.5 },
        };
        let comp = gam.compensator_drift(&u1, &spec);
        assert!(comp.sub(&g.scaled(2.0)).max_abs() < 1e-15);
        let sym = JumpSpec {
            intensity: 3.0,
            law: MarkLaw::Gaussian { mean: 0.0, std: 1.0 },
        };
        assert_eq!(gam.compensator_drift(&u1, &sym).max_abs(), 0.0);
    }

    #[test]
    fn directions_have_unit_norm() {
        for d in [2, 3] {
            let b = Arc::new(build_basis(d, 3).unwrap());
            for dir in [Direction::Shear, Direction::TaylorGreen] {
                let g = dir.build(&b).unwrap();
                assert!((g.norm_h() - 1.0).abs() < 1e-14);
                assert!(g.divergence_defect() < 1e-13);
            }
        }
        let tiny = Arc::new(build_basis(2, 1).unwrap());
        assert!(Direction::Shear.build(&tiny).is_err());
    }

    #[test]
    fn record_is_deterministic_and_coarsens_consistently() {
        let b = Arc::new(build_basis(2, 4).unwrap());
        let m = model(&b, SigmaFamily::additive(1.0), 5.0, 1.0, 0.0);
        let key = StreamKey::new(9, 3);
        let r1 = NoiseRecord::sample(&m, key, 1.0, 1.0 / 64.0).unwrap();
        let r2 = NoiseRecord::sample(&m, key, 1.0, 1.0 / 64.0).unwrap();
        assert!(r1.bitwise_eq(&r2));
        assert_eq!(r1.steps(), 64);
        assert!(r1.jump_times.windows(2).all(|w| w[0] < w[1]));
        let c = r1.coarsen(4).unwrap();
        assert_eq!(c.steps(), 16);
        assert_eq!(c.jump_times, r1.jump_times);
        let (a, z) = (r1.total_increment(), c.total_increment());
        for (x, y) in a.iter().zip(&z) {
            assert!((x - y).abs() < 1e-12);
        }
        let total: f64 = c.segments.iter().map(|s| s.len).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // grid-point increments do not depend on the jumps
        let nojump = model(&b, SigmaFamily::additive(1.0), 0.0, 1.0, 0.0);
        let r0 = NoiseRecord::sample(&nojump, key, 1.0, 1.0 / 64.0).unwrap();
        let c0 = r0.coarsen(64).unwrap();
        let c1 = r1.coarsen(64).unwrap();
        let s1: Vec<f64> = c1.total_increment();
        for (x, y) in c0.segments[0].dw.iter().zip(&s1) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(r1.coarsen(5).is_err());
        assert!(NoiseRecord::sample(&m, key, 1.0, 0.3).is_err());
    }

    #[test]
    fn smaller_bases_see_a_prefix_of_the_streams() {
        let small = Arc::new(build_basis(2, 3).unwrap());
        let big = Arc::new(build_basis(2, 6).unwrap());
        let key = StreamKey::new(4, 0);
        let rs = NoiseRecord::sample(&model(&small, SigmaFamily::additive(1.0), 0.0, 0.0, 0.0), key, 0.5, 0.125).unwrap();
        let rb = NoiseRecord::sample(&model(&big, SigmaFamily::additive(1.0), 0.0, 0.0, 0.0), key, 0.5, 0.125).unwrap();
        let q = QSpectrum { c: 1.0, s: 1.5 };
        let (ms, mb) = (DofMap::new(&small, &q), DofMap::new(&big, &q));
        for (ss, sb) in rs.segments.iter().zip(&rb.segments) {
            let fs = ms.to_field(&small, &ss.dw);
            let fb = mb.to_field(&big, &sb.dw).transfer_to(&small);
            assert!(fs.bitwise_eq(&fb));
        }
    }

    #[test]
    fn certification_flags_only_the_adversarial_family() {
        let b = Arc::new(build_basis(2, 3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let corpus = certification_corpus(&b, 1000, 100.0, &mut rng);
        let add = model(&b, SigmaFamily::additive(0.5), 2.0, 1.0, 0.0);
        let rep = certify_hypotheses(&add, &corpus);
        assert!(rep.pass);
        assert_eq!(rep.lipschitz_ratio, 0.0);
        let bm = model(
            &b,
            SigmaFamily {
                kind: SigmaKind::BoundedMultiplicative,
                amplitude: 0.5,
                rho: 0.8,
            },
            2.0,
            0.5,
            0.7,
        );
        let rep = certify_hypotheses(&bm, &corpus);
        assert!(rep.pass, "{rep:?}");
        let quad = model(
            &b,
            SigmaFamily {
                kind: SigmaKind::Quadratic,
                amplitude: 0.5,
                rho: 0.8,
            },
            2.0,
            0.5,
            0.7,
        );
        let rep = certify_hypotheses(&quad, &corpus);
        assert!(!rep.pass);
        assert!(rep.violations.iter().any(|v| v.clause == Clause::Growth));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(QSpectrum::new(1.0, 1.0, 2).is_err());
        assert!(QSpectrum::new(1.0, 1.6, 3).is_ok());
        let bad = JumpSpec {
            intensity: -1.0,
            law: MarkLaw::Gaussian { mean: 0.0, std: 1.0 },
        };
        assert!(bad.validate().is_err());
    }
}
