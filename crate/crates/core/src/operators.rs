//! Deterministic operators of the Galerkin system: Stokes, convection,
//! absorption, sharp and smooth spectral projections.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisIndex;
use crate::error::OperatorError;
use crate::field::{PhysicalField, SpectralField, VectorSpectrum};
use crate::transform::{project_onto_polarizations, Grid};

/// How the quadratic convection term is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    /// Direct truncated convolution over wavevector pairs.
    ExactConvolution,
    /// Pseudo-spectral products on a zero-padded grid.
    PaddedCollocation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub r: f64,
    pub mu: f64,
    pub beta: f64,
    pub dealias: Dealias,
    pub padding: f64,
    /// Include `B(u, u)` in the drift.
    pub convection: bool,
    /// Include `β C(u)` in the drift.
    pub absorption: bool,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
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

impl OperatorConfig {
    pub fn validate(&self) -> Result<(), OperatorError> {
        if !(self.r >= 1.0) || !self.r.is_finite() {
            return Err(OperatorError::InvalidConfig(format!("r >= 1 required, got {}", self.r)));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(OperatorError::InvalidConfig(format!("mu > 0 required, got {}", self.mu)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(OperatorError::InvalidConfig(format!(
                "beta > 0 required, got {}",
                self.beta
            )));
        }
        if !(self.padding >= 1.5) || !self.padding.is_finite() {
            return Err(OperatorError::InvalidConfig(format!(
                "padding >= 3/2 required, got {}",
                self.padding
            )));
        }
        Ok(())
    }

    /// Coefficient actually multiplying `C(u)` in the drift.
    pub fn effective_beta(&self) -> f64 {
        if self.absorption {
            self.beta
        } else {
            0.0
        }
    }

    /// Padding factor used for the absorption product: odd integer `r`
    /// needs `(r + 1) / 2` to be alias free.
    pub fn absorption_padding(&self) -> f64 {
        let r = self.r;
        let odd = r.fract() == 0.0 && (r as i64) % 2 == 1;
        if odd {
            self.padding.max(((r + 1.0) / 2.0).ceil())
        } else {
            self.padding
        }
    }
}

/// Grid points per axis needed for an alias-free product with the given
/// padding when the largest retained component is `kmax`.
pub fn padded_size(kmax: usize, padding: f64) -> usize {
    let quad = 3 * kmax + 1;
    let pad = (padding * 2.0 * kmax as f64).ceil() as usize + 1;
    quad.max(pad).max(1)
}

/// Precomputed grid and basis for repeated operator evaluation.
#[derive(Clone, Debug)]
pub struct Operators {
    basis: Arc<BasisIndex>,
    cfg: OperatorConfig,
    grid: Grid,
}

impl Operators {
    /// Chooses the smallest power-of-two grid that is alias free for both
    /// `B` and (for odd integer `r`) `C`.
    pub fn new(basis: &Arc<BasisIndex>, cfg: OperatorConfig) -> Result<Self, OperatorError> {
        cfg.validate()?;
        let kmax = basis.max_component();
        let need = padded_size(kmax, cfg.absorption_padding());
        Self::with_grid(basis, cfg, need.next_power_of_two())
    }

    pub fn with_grid(
        basis: &Arc<BasisIndex>,
        cfg: OperatorConfig,
        size: usize,
    ) -> Result<Self, OperatorError> {
        cfg.validate()?;
        let required = padded_size(basis.max_component(), 1.5);
        if size < required {
            return Err(OperatorError::InsufficientGrid { grid: size, required });
        }
        Ok(Self {
            basis: Arc::clone(basis),
            cfg,
            grid: Grid::new(basis.dim(), size),
        })
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn to_physical(&self, u: &SpectralField) -> Result<PhysicalField, OperatorError> {
        Ok(self.grid.to_physical(u)?)
    }

    pub fn to_spectral(&self, f: &PhysicalField) -> Result<SpectralField, OperatorError> {
        Ok(self.grid.to_spectral(f, &self.basis)?)
    }

    /// `Π_n P[(u·∇)v]` using the configured evaluation mode.
    pub fn convection(&self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField, OperatorError> {
        match self.cfg.dealias {
            Dealias::ExactConvolution => Ok(convection_exact(u, v)),
            Dealias::PaddedCollocation => self.convection_collocated(u, v),
        }
    }

    /// Pseudo-spectral `B(u, v)` in divergence form,
    /// `F[(u·∇)v]_i = Σ_j i k_j F[u_j v_i]`.
    pub fn convection_collocated(
        &self,
        u: &SpectralField,
        v: &SpectralField,
    ) -> Result<SpectralField, OperatorError> {
        let pu = self.grid.to_physical(u)?;
        let same = u.bitwise_eq(v);
        let pv = if same { pu.clone() } else { self.grid.to_physical(v)? };
        Ok(self.convection_from_physical(&pu, &pv, same))
    }

    fn convection_from_physical(&self, pu: &PhysicalField, pv: &PhysicalField, symmetric: bool) -> SpectralField {
        let d = self.basis.dim();
        let slots: Vec<usize> = self.basis.waves().iter().map(|k| self.grid.slot(k)).collect();
        let mut vs = VectorSpectrum::zeros(&self.basis);
        let mut prod = vec![0.0; pu.points()];
        for j in 0..d {
            for i in 0..d {
                if symmetric && i < j {
                    continue;
                }
                for (x, p) in prod.iter_mut().enumerate() {
                    *p = pu.components[j][x] * pv.components[i][x];
                }
                let spec = self.grid.forward_scalar(&prod);
                for (w, &s) in slots.iter().enumerate() {
                    let k = self.basis.wave(w).as_f64();
                    let c = spec[s];
                    vs.values[w][i] += Complex64::new(0.0, k[j]) * c;
                    if symmetric && i != j {
                        // u_i u_j contributes to component j with derivative i
                        vs.values[w][j] += Complex64::new(0.0, k[i]) * c;
                    }
                }
            }
        }
        project_onto_polarizations(&vs)
    }

    /// `B(u) = B(u, u)`.
    pub fn convection_self(&self, u: &SpectralField) -> Result<SpectralField, OperatorError> {
        match self.cfg.dealias {
            Dealias::ExactConvolution => Ok(convection_exact(u, u)),
            Dealias::PaddedCollocation => {
                let pu = self.grid.to_physical(u)?;
                Ok(self.convection_from_physical(&pu, &pu, true))
            }
        }
    }

    /// `C(u) = Π_n P(|u|^{r-1} u)` from pointwise evaluation on the grid.
    pub fn absorption(&self, u: &SpectralField) -> Result<SpectralField, OperatorError> {
        let pu = self.grid.to_physical(u)?;
        let g = absorption_pointwise(&pu, self.cfg.r)?;
        Ok(self.grid.to_spectral(&g, &self.basis)?)
    }

    /// Drift pieces evaluated from one physical transform of `u`.
    pub fn nonlinear_terms(&self, u: &SpectralField) -> Result<NonlinearTerms, OperatorError> {
        let need_phys = self.cfg.absorption
            || (self.cfg.convection && self.cfg.dealias == Dealias::PaddedCollocation);
        let phys = if need_phys {
            Some(self.grid.to_physical(u)?)
        } else {
            None
        };
        let convection = if !self.cfg.convection {
            None
        } else {
            Some(match self.cfg.dealias {
                Dealias::ExactConvolution => convection_exact(u, u),
                Dealias::PaddedCollocation => {
                    let p = phys.as_ref().expect("physical field present");
                    self.convection_from_physical(p, p, true)
                }
            })
        };
        let (absorption, lr1) = if self.cfg.absorption {
            let p = phys.as_ref().expect("physical field present");
            let g = absorption_pointwise(p, self.cfg.r)?;
            let lr1 = p.mean_dot(&g);
            (Some(self.grid.to_spectral(&g, &self.basis)?), lr1)
        } else {
            let lr1 = match &phys {
                Some(p) => p.mean_pow(self.cfg.r + 1.0),
                None => 0.0,
            };
            (None, lr1)
        };
        Ok(NonlinearTerms {
            convection,
            absorption,
            lr1_pow: lr1,
        })
    }

    /// `(‖u‖_H, ‖u‖_V, ‖u‖_{L^{r+1}})` with the last evaluated on the grid.
    pub fn norms(&self, u: &SpectralField) -> Result<Norms, OperatorError> {
        let p = self.grid.to_physical(u)?;
        Ok(Norms {
            h: u.norm_h(),
            v: u.norm_v_sq().sqrt(),
            lr1: p.lp_norm(self.cfg.r + 1.0),
        })
    }

    /// `‖u‖^{r+1}_{L^{r+1}}` on the operator grid.
    pub fn lr1_pow(&self, u: &SpectralField) -> Result<f64, OperatorError> {
        Ok(self.grid.to_physical(u)?.mean_pow(self.cfg.r + 1.0))
    }
}

#[derive(Clone, Debug)]
pub struct NonlinearTerms {
    pub convection: Option<SpectralField>,
    pub absorption: Option<SpectralField>,
    /// Grid mean of `|u|^{r+1}`; equals `⟨C(u), u⟩`.
    pub lr1_pow: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub h: f64,
    pub v: f64,
    pub lr1: f64,
}

/// Pointwise `|u|^{r-1} u`.
pub fn absorption_pointwise(u: &PhysicalField, r: f64) -> Result<PhysicalField, OperatorError> {
    let mut out = PhysicalField::zeros(u.dim, u.size);
    let e = r - 1.0;
    for x in 0..u.points() {
        let m = u.magnitude(x);
        let f = if e == 0.0 { 1.0 } else { m.powf(e) };
        if !f.is_finite() {
            return Err(OperatorError::NonFinite);
        }
        for c in 0..u.dim {
            let v = f * u.components[c][x];
            if !v.is_finite() {
                return Err(OperatorError::NonFinite);
            }
            out.components[c][x] = v;
        }
    }
    Ok(out)
}

/// `Au`: multiply every coefficient by `|k|²`.
pub fn apply_stokes(u: &SpectralField) -> SpectralField {
    let mut out = u.clone();
    let b = Arc::clone(u.basis());
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        *c *= b.mode_norm_sq(i);
    }
    out
}

/// Project full vector coefficients with `I - k kᵀ / |k|²`.
pub fn leray_project_vector(f: &VectorSpectrum) -> VectorSpectrum {
    let mut out = f.clone();
    for (w, v) in out.values.iter_mut().enumerate() {
        let k = f.basis.wave(w).as_f64();
        let kk = f.basis.wave_norm_sq(w);
        let dot = v[0] * k[0] + v[1] * k[1] + v[2] * k[2];
        for i in 0..3 {
            v[i] -= dot * (k[i] / kk);
        }
    }
    out
}

/// Leray projection onto the divergence-free basis.
pub fn leray_project(f: &VectorSpectrum) -> SpectralField {
    project_onto_polarizations(f)
}

/// Exact truncated convolution
/// `B̂(k) = P_k Σ_{p+q=k} i (û(p)·q) v̂(q)` over basis wavevectors.
pub fn convection_exact(u: &SpectralField, v: &SpectralField) -> SpectralField {
    let basis = u.basis();
    let uv = u.to_vector_spectrum();
    let vv = v.to_vector_spectrum();
    let nw = basis.num_waves();
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = VectorSpectrum::zeros(basis);
    let waves = basis.waves();
    let qs: Vec<[f64; 3]> = waves.iter().map(|k| k.as_f64()).collect();
    for p in 0..nw {
        let up = uv.values[p];
        if up.iter().all(|c| *c == zero) {
            continue;
        }
        let kp = waves[p];
        for q in 0..nw {
            let kq = waves[q];
            let k = crate::basis::WaveVector([
                kp.0[0] + kq.0[0],
                kp.0[1] + kq.0[1],
                kp.0[2] + kq.0[2],
            ]);
            let Some(w) = basis.find(&k) else { continue };
            let qf = qs[q];
            let s = up[0] * qf[0] + up[1] * qf[1] + up[2] * qf[2];
            let s = Complex64::new(-s.im, s.re);
            let vq = vv.values[q];
            for i in 0..3 {
                acc.values[w][i] += s * vq[i];
            }
        }
    }
    project_onto_polarizations(&acc)
}

/// Trilinear form `b(u, v, w) = ⟨B(u, v), w⟩`.
pub fn trilinear(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> f64 {
    convection_exact(u, v).inner(w)
}

/// `Π_m u`: zero every coefficient with `|k|² ≥ m²`.
pub fn galerkin_truncate(u: &SpectralField, m: usize) -> Result<SpectralField, OperatorError> {
    let n = u.basis().cutoff();
    if m > n {
        return Err(OperatorError::CutoffTooLarge { m, n });
    }
    let cut = (m * m) as f64;
    let b = Arc::clone(u.basis());
    let mut out = u.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        if b.mode_norm_sq(i) >= cut {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// Smoothing projection: `c ↦ e^{-|k|²/n} c` for `|k|² < n²`, else 0.
pub fn smooth_project(u: &SpectralField, n: f64) -> SpectralField {
    let cut = n * n;
    let b = Arc::clone(u.basis());
    let mut out = u.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        let kk = b.mode_norm_sq(i);
        if kk < cut {
            *c *= (-kk / n).exp();
        } else {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, WaveVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(d: usize, n: usize) -> Arc<BasisIndex> {
        Arc::new(build_basis(d, n).unwrap())
    }

    #[test]
    fn stokes_scales_by_eigenvalue() {
        let b = basis(2, 4);
        let w = b.find(&WaveVector([1, 0, 0])).unwrap();
        let u = SpectralField::single_mode(&b, w, 0, 1.0);
        assert_eq!(apply_stokes(&u), u);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralField::random(&b, &mut rng, 0.0);
        let au = apply_stokes(&u);
        assert!((au.inner(&u) - u.norm_v_sq()).abs() <= 1e-12 * u.norm_v_sq());
    }

    #[test]
    fn leray_hand_example() {
        // v = (1, 0) at k = (1, 1): v - (v·k / 2) k = (1/2, -1/2)
        let b = basis(2, 3);
        let w = b.find(&WaveVector([1, 1, 0])).unwrap();
        let mut f = VectorSpectrum::zeros(&b);
        f.values[w][0] = Complex64::new(1.0, 0.0);
        let p = leray_project_vector(&f);
        assert!((p.values[w][0].re - 0.5).abs() < 1e-15);
        assert!((p.values[w][1].re + 0.5).abs() < 1e-15);
        let s = leray_project(&f);
        let back = s.to_vector_spectrum();
        // symmetrization halves the lone coefficient
        assert!((back.values[w][0].re - 0.25).abs() < 1e-15);
        assert!((back.values[w][1].re + 0.25).abs() < 1e-15);
    }

    #[test]
    fn leray_kills_gradients_and_fixes_solenoidal() {
        let b = basis(3, 3);
        for w in 0..b.num_waves() {
            let g = VectorSpectrum::gradient_of_cosine(&b, w);
            assert!(leray_project(&g).max_abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = SpectralField::random(&b, &mut rng, 1.0);
        let p = leray_project(&u.to_vector_spectrum());
        assert!(p.sub(&u).max_abs() < 1e-15);
    }

    #[test]
    fn convection_modes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2, 3] {
            let b = basis(d, 4);
            let ops = Operators::new(&b, OperatorConfig::default()).unwrap();
            let u = SpectralField::random(&b, &mut rng, 1.0);
            let v = SpectralField::random(&b, &mut rng, 1.0);
            let ex = convection_exact(&u, &v);
            let co = ops.convection_collocated(&u, &v).unwrap();
            let rel = ex.sub(&co).norm_h() / ex.norm_h();
            assert!(rel < 1e-12, "d={d} rel={rel}");
            let s = ops.convection_self(&u).unwrap();
            let e = convection_exact(&u, &u);
            assert!(s.sub(&e).norm_h() / e.norm_h() < 1e-12);
        }
    }

    #[test]
    fn convection_of_zero_is_zero() {
        let b = basis(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = SpectralField::random(&b, &mut rng, 1.0);
        assert_eq!(convection_exact(&SpectralField::zeros(&b), &v).max_abs(), 0.0);
    }

    #[test]
    fn absorption_identity_for_linear_exponent() {
        let b = basis(2, 5);
        let cfg = OperatorConfig {
            r: 1.0,
            ..OperatorConfig::default()
        };
        let ops = Operators::new(&b, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = SpectralField::random(&b, &mut rng, 1.0);
        let c = ops.absorption(&u).unwrap();
        assert!(c.sub(&u).norm_h() < 1e-13 * u.norm_h());
    }

    #[test]
    fn absorption_energy_matches_grid_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for r in [1.0, 2.0, 3.0, 5.0] {
            let b = basis(2, 5);
            let cfg = OperatorConfig {
                r,
                ..OperatorConfig::default()
            };
            let ops = Operators::new(&b, cfg).unwrap();
            let u = SpectralField::random(&b, &mut rng, 1.0);
            let lhs = ops.absorption(&u).unwrap().inner(&u);
            let rhs = ops.lr1_pow(&u).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs, "r={r}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn grid_sizes_follow_padding_rule() {
        let b = basis(2, 8);
        let q = Operators::new(&b, OperatorConfig::default()).unwrap();
        // kmax = 7: 3/2 rule needs 22, cubic needs 29
        assert_eq!(q.grid().size(), 32);
        let five = Operators::new(
            &b,
            OperatorConfig {
                r: 5.0,
                ..OperatorConfig::default()
            },
        )
        .unwrap();
        assert_eq!(five.grid().size(), 64);
        assert!(matches!(
            Operators::with_grid(&b, OperatorConfig::default(), 16),
            Err(OperatorError::InsufficientGrid { grid: 16, required: 22 })
        ));
    }

    #[test]
    fn truncation_and_smoothing() {
        let b = basis(2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = SpectralField::random(&b, &mut rng, 0.5);
        assert_eq!(galerkin_truncate(&u, 6).unwrap(), u);
        assert_eq!(galerkin_truncate(&u, 1).unwrap().max_abs(), 0.0);
        assert!(galerkin_truncate(&u, 7).is_err());
        let t = galerkin_truncate(&u, 2).unwrap();
        let direct: f64 = (0..u.len())
            .filter(|&i| b.mode_norm_sq(i) < 4.0)
            .map(|i| u.coeffs()[i].norm_sqr())
            .sum();
        assert!((t.norm_h_sq() - direct).abs() < 1e-14);
        let w = b.find(&WaveVector([0, 1, 0])).unwrap();
        let m = SpectralField::single_mode(&b, w, 0, 1.0);
        let s = smooth_project(&m, 2.0);
        assert!((s.norm_h() - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let bad = OperatorConfig {
            mu: -1.0,
            ..OperatorConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OperatorConfig {
            padding: 1.0,
            ..OperatorConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
