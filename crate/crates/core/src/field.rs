//! Spectral and physical field representations.
//!
//! Norms use the normalized Lebesgue measure on the torus, so that
//! `‖u‖²_H = Σ |c|²` (Parseval with unit weight), `‖u‖²_V = Σ |k|²|c|²`
//! and `‖u‖^p_{L^p}` is the grid mean of `|u(x)|^p`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::BasisIndex;

/// Coefficients of a divergence-free field on a [`BasisIndex`], one complex
/// amplitude per (wavevector, polarization) in basis order.
#[derive(Clone, Debug)]
pub struct SpectralField {
    basis: Arc<BasisIndex>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(basis: &Arc<BasisIndex>) -> Self {
        Self {
            basis: Arc::clone(basis),
            coeffs: vec![Complex64::new(0.0, 0.0); basis.num_modes()],
        }
    }

    /// Panics if the coefficient count does not match the basis.
    pub fn from_coeffs(basis: &Arc<BasisIndex>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), basis.num_modes(), "coefficient count mismatch");
        Self {
            basis: Arc::clone(basis),
            coeffs,
        }
    }

    /// Real field `amplitude · √2 p cos(k·x)`, with H norm `|amplitude|`.
    pub fn single_mode(basis: &Arc<BasisIndex>, wave: usize, pol: usize, amplitude: f64) -> Self {
        let mut f = Self::zeros(basis);
        let c = Complex64::new(amplitude / 2f64.sqrt(), 0.0);
        let cw = basis.conj_wave(wave);
        f.coeffs[basis.mode_index(wave, pol)] = c;
        f.coeffs[basis.mode_index(cw, pol)] = c.conj();
        f
    }

    /// Random Hermitian field with spectral envelope `(1 + |k|²)^{-decay/2}`.
    pub fn random<R: Rng + ?Sized>(basis: &Arc<BasisIndex>, rng: &mut R, decay: f64) -> Self {
        let mut f = Self::zeros(basis);
        let np = basis.npol();
        for w in 0..basis.num_waves() {
            if !basis.wave(w).is_canonical() {
                continue;
            }
            let env = (1.0 + basis.wave_norm_sq(w)).powf(-decay / 2.0);
            let cw = basis.conj_wave(w);
            for p in 0..np {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let c = Complex64::new(re, im) * env;
                f.coeffs[w * np + p] = c;
                f.coeffs[cw * np + p] = c.conj();
            }
        }
        f
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// H inner product `(u, v) = Re Σ conj(u_k) v_k`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn norm_h_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm_h(&self) -> f64 {
        self.norm_h_sq().sqrt()
    }

    pub fn norm_v_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| self.basis.mode_norm_sq(i) * c.norm_sqr())
            .sum()
    }

    /// Dual norm `‖u‖²_{V'} = Σ |k|^{-2} |c|²`.
    pub fn norm_dual_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.norm_sqr() / self.basis.mode_norm_sq(i))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        debug_assert_eq!(self.coeffs.len(), x.coeffs.len());
        for (c, d) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += d * a;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// `max |c(-k) - conj(c(k))|` over all modes.
    pub fn hermitian_defect(&self) -> f64 {
        let np = self.basis.npol();
        let mut worst: f64 = 0.0;
        for w in 0..self.basis.num_waves() {
            let cw = self.basis.conj_wave(w);
            for p in 0..np {
                let a = self.coeffs[w * np + p];
                let b = self.coeffs[cw * np + p];
                worst = worst.max((b - a.conj()).norm());
            }
        }
        worst
    }

    /// Replace each conjugate pair by its Hermitian average.
    pub fn symmetrize(&mut self) {
        let np = self.basis.npol();
        for w in 0..self.basis.num_waves() {
            let cw = self.basis.conj_wave(w);
            if !self.basis.wave(w).is_canonical() {
                continue;
            }
            for p in 0..np {
                let a = self.coeffs[w * np + p];
                let b = self.coeffs[cw * np + p];
                let m = (a + b.conj()) * 0.5;
                self.coeffs[w * np + p] = m;
                self.coeffs[cw * np + p] = m.conj();
            }
        }
    }

    /// Full d-vector Fourier coefficient per wavevector.
    pub fn to_vector_spectrum(&self) -> VectorSpectrum {
        let np = self.basis.npol();
        let zero = Complex64::new(0.0, 0.0);
        let values = (0..self.basis.num_waves())
            .map(|w| {
                let mut v = [zero; 3];
                for p in 0..np {
                    let c = self.coeffs[w * np + p];
                    let e = self.basis.polarization(w, p);
                    for i in 0..3 {
                        v[i] += c * e[i];
                    }
                }
                v
            })
            .collect();
        VectorSpectrum {
            basis: Arc::clone(&self.basis),
            values,
        }
    }

    /// Maximum of `|k · û(k)|` over the reconstructed vector coefficients.
    pub fn divergence_defect(&self) -> f64 {
        let vs = self.to_vector_spectrum();
        let mut worst: f64 = 0.0;
        for (w, v) in vs.values.iter().enumerate() {
            let k = self.basis.wave(w).as_f64();
            let dot = v[0] * k[0] + v[1] * k[1] + v[2] * k[2];
            worst = worst.max(dot.norm());
        }
        worst
    }

    /// Copy coefficients into another basis of the same dimension; modes
    /// absent from the target are dropped, new modes are zero.
    pub fn transfer_to(&self, target: &Arc<BasisIndex>) -> SpectralField {
        assert_eq!(self.basis.dim(), target.dim(), "dimension mismatch");
        let mut out = SpectralField::zeros(target);
        let np = target.npol();
        for w in 0..self.basis.num_waves() {
            if let Some(tw) = target.find(&self.basis.wave(w)) {
                for p in 0..np {
                    out.coeffs[tw * np + p] = self.coeffs[w * np + p];
                }
            }
        }
        out
    }

    /// Bitwise equality of all coefficients (distinguishes `-0.0` and NaN payloads).
    pub fn bitwise_eq(&self, other: &SpectralField) -> bool {
        self.coeffs.len() == other.coeffs.len()
            && self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        *self.basis == *other.basis && self.coeffs == other.coeffs
    }
}

/// Fourier coefficients of an arbitrary (not necessarily solenoidal)
/// vector field, one d-vector per nonzero wavevector of a basis.
#[derive(Clone, Debug)]
pub struct VectorSpectrum {
    pub basis: Arc<BasisIndex>,
    pub values: Vec<[Complex64; 3]>,
}

impl VectorSpectrum {
    pub fn zeros(basis: &Arc<BasisIndex>) -> Self {
        Self {
            basis: Arc::clone(basis),
            values: vec![[Complex64::new(0.0, 0.0); 3]; basis.num_waves()],
        }
    }

    /// Gradient of `φ = cos(k·x)`: coefficients `±i k / 2` at `±k`.
    pub fn gradient_of_cosine(basis: &Arc<BasisIndex>, wave: usize) -> Self {
        let mut out = Self::zeros(basis);
        let cw = basis.conj_wave(wave);
        for (w, sign) in [(wave, 1.0), (cw, -1.0)] {
            let k = basis.wave(wave).as_f64();
            for i in 0..3 {
                out.values[w][i] = Complex64::new(0.0, sign * 0.5 * k[i]);
            }
        }
        out
    }
}

/// Real vector field sampled on an `N^d` collocation grid; one value
/// array per component, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    pub dim: usize,
    pub size: usize,
    pub components: Vec<Vec<f64>>,
}

impl PhysicalField {
    pub fn zeros(dim: usize, size: usize) -> Self {
        Self {
            dim,
            size,
            components: vec![vec![0.0; size.pow(dim as u32)]; dim],
        }
    }

    pub fn points(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self, idx: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c[idx] * c[idx])
            .sum::<f64>()
            .sqrt()
    }

    /// Grid mean of `|u|^p` (normalized-measure `L^p` norm to the power p).
    pub fn mean_pow(&self, p: f64) -> f64 {
        let n = self.points();
        (0..n).map(|i| self.magnitude(i).powf(p)).sum::<f64>() / n as f64
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.mean_pow(p).powf(1.0 / p)
    }

    /// Grid mean of `u · v`.
    pub fn mean_dot(&self, other: &PhysicalField) -> f64 {
        let n = self.points();
        let mut s = 0.0;
        for (a, b) in self.components.iter().zip(&other.components) {
            for i in 0..n {
                s += a[i] * b[i];
            }
        }
        s / n as f64
    }

    pub fn component_means(&self) -> Vec<f64> {
        let n = self.points() as f64;
        self.components.iter().map(|c| c.iter().sum::<f64>() / n).collect()
    }
}
