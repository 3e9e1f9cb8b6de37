//! Spectral <-> physical transforms on an `N^d` collocation grid.
//!
//! `to_physical` evaluates `u(x_j) = Σ_k û(k) e^{i k·x_j}` at
//! `x_j = 2π j / N`; `to_spectral` is the inverse restricted to basis
//! modes (forward DFT divided by `N^d`, then projection onto the
//! polarization vectors).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::basis::{BasisIndex, WaveVector};
use crate::error::TransformError;
use crate::field::{PhysicalField, SpectralField, VectorSpectrum};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// FFT plans for one grid; cheap to clone and safe to share.
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("size", &self.size)
            .finish()
    }
}

/// Smallest grid that represents every mode of the basis without aliasing.
pub fn min_grid_size(basis: &BasisIndex) -> usize {
    2 * basis.max_component() + 1
}

impl Grid {
    pub fn new(dim: usize, size: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size.max(1));
        let inverse = planner.plan_fft_inverse(size.max(1));
        Self {
            dim,
            size,
            forward,
            inverse,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn points(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    fn check(&self, basis: &BasisIndex) -> Result<(), TransformError> {
        if basis.dim() != self.dim {
            return Err(TransformError::DimensionMismatch {
                field: basis.dim(),
                grid: self.dim,
            });
        }
        let required = min_grid_size(basis);
        if self.size < required {
            return Err(TransformError::GridTooSmall {
                grid: self.size,
                required,
            });
        }
        Ok(())
    }

    /// Row-major grid offset of a wavevector (components taken mod N).
    pub fn slot(&self, k: &WaveVector) -> usize {
        let n = self.size as i64;
        let mut idx = 0usize;
        for c in &k.0[..self.dim] {
            idx = idx * self.size + (*c as i64).rem_euclid(n) as usize;
        }
        idx
    }

    /// In-place multidimensional DFT, unnormalized in both directions.
    pub fn fft(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.size;
        let total = data.len();
        debug_assert_eq!(total, self.points());
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let mut lines = vec![ZERO; total];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let outer = total / (stride * n);
            let mut l = 0;
            for o in 0..outer {
                for i in 0..stride {
                    let base = o * stride * n + i;
                    let line = &mut lines[l * n..(l + 1) * n];
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    l += 1;
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            let mut l = 0;
            for o in 0..outer {
                for i in 0..stride {
                    let base = o * stride * n + i;
                    let line = &lines[l * n..(l + 1) * n];
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                    l += 1;
                }
            }
        }
    }

    /// Physical values of every component of a vector spectrum.
    pub fn vector_to_physical(&self, vs: &VectorSpectrum) -> Result<PhysicalField, TransformError> {
        self.check(&vs.basis)?;
        let slots: Vec<usize> = vs.basis.waves().iter().map(|k| self.slot(k)).collect();
        let mut out = PhysicalField::zeros(self.dim, self.size);
        let mut buf = vec![ZERO; self.points()];
        for i in 0..self.dim {
            buf.iter_mut().for_each(|c| *c = ZERO);
            for (w, &s) in slots.iter().enumerate() {
                buf[s] = vs.values[w][i];
            }
            self.fft(&mut buf, true);
            for (o, c) in out.components[i].iter_mut().zip(&buf) {
                *o = c.re;
            }
        }
        Ok(out)
    }

    pub fn to_physical(&self, u: &SpectralField) -> Result<PhysicalField, TransformError> {
        self.vector_to_physical(&u.to_vector_spectrum())
    }

    /// Forward transform of one real grid array, normalized by `N^d`.
    pub fn forward_scalar(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft(&mut buf, false);
        let scale = 1.0 / self.points() as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Fourier coefficients of a physical field on the basis wavevectors
    /// (no projection).
    pub fn to_vector_spectrum(
        &self,
        f: &PhysicalField,
        basis: &Arc<BasisIndex>,
    ) -> Result<VectorSpectrum, TransformError> {
        self.check(basis)?;
        if f.dim != self.dim || f.size != self.size {
            return Err(TransformError::DimensionMismatch {
                field: f.dim,
                grid: self.dim,
            });
        }
        let mut vs = VectorSpectrum::zeros(basis);
        let slots: Vec<usize> = basis.waves().iter().map(|k| self.slot(k)).collect();
        for i in 0..self.dim {
            let spec = self.forward_scalar(&f.components[i]);
            for (w, &s) in slots.iter().enumerate() {
                vs.values[w][i] = spec[s];
            }
        }
        Ok(vs)
    }

    /// Forward transform restricted to basis modes. Components along `k`
    /// are discarded, so the result is the Leray projection of `f`.
    pub fn to_spectral(
        &self,
        f: &PhysicalField,
        basis: &Arc<BasisIndex>,
    ) -> Result<SpectralField, TransformError> {
        let vs = self.to_vector_spectrum(f, basis)?;
        Ok(project_onto_polarizations(&vs))
    }
}

/// `c(k, p) = p(k) · v(k)` followed by Hermitian symmetrization.
pub(crate) fn project_onto_polarizations(vs: &VectorSpectrum) -> SpectralField {
    let basis = &vs.basis;
    let np = basis.npol();
    let mut out = SpectralField::zeros(basis);
    {
        let c = out.coeffs_mut();
        for (w, v) in vs.values.iter().enumerate() {
            for p in 0..np {
                let e = basis.polarization(w, p);
                c[w * np + p] = v[0] * e[0] + v[1] * e[1] + v[2] * e[2];
            }
        }
    }
    out.symmetrize();
    out
}

pub fn to_physical(u: &SpectralField, size: usize) -> Result<PhysicalField, TransformError> {
    Grid::new(u.basis().dim(), size).to_physical(u)
}

pub fn to_spectral(f: &PhysicalField, basis: &Arc<BasisIndex>) -> Result<SpectralField, TransformError> {
    Grid::new(f.dim, f.size).to_spectral(f, basis)
}
