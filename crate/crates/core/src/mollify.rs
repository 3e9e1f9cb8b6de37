//! Time mollification with a compactly supported bump kernel.
//!
//! The kernel is `ζ(s) ∝ exp(-1 / (1 - s²))` on `(-1, 1)`, rescaled to
//! width `h`. Discrete weights at the sampling nodes are renormalized to
//! unit sum, so constants are reproduced exactly and the half-mass of the
//! discrete kernel is exactly one half.

use crate::error::MollifyError;
use crate::field::SpectralField;

/// Values that can be averaged with real weights.
pub trait Sample: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, a: f64, x: &Self);
}

impl Sample for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }

    fn add_scaled(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Sample for SpectralField {
    fn zero_like(&self) -> Self {
        SpectralField::zeros(self.basis())
    }

    fn add_scaled(&mut self, a: f64, x: &Self) {
        self.axpy(a, x);
    }
}

/// Samples on a uniform time grid starting at `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries<V> {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<V>,
}

impl<V: Sample> TimeSeries<V> {
    pub fn new(t0: f64, dt: f64, values: Vec<V>) -> Result<Self, MollifyError> {
        if values.len() < 2 {
            return Err(MollifyError::TooShort);
        }
        Ok(Self { t0, dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }
}

/// Unnormalized bump `exp(-1 / (1 - s²))` on `(-1, 1)`.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// `∫_{-1}^{1} bump`, by composite Simpson on a fine grid.
pub fn bump_mass() -> f64 {
    let n = 20_000;
    let h = 2.0 / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let x = -1.0 + h * i as f64;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * bump(x);
    }
    s * h / 3.0
}

/// Continuous kernel of width `h` and unit mass.
pub fn kernel(t: f64, h: f64, mass: f64) -> f64 {
    bump(t / h) / (h * mass)
}

/// Half mass `w_0 / 2 + Σ_{j>0} w_j` of the discrete weights.
pub fn kernel_half_mass(h: f64, dt: f64) -> f64 {
    let w = kernel_weights(h, dt);
    let m = (w.len() - 1) / 2;
    0.5 * w[m] + w[m + 1..].iter().sum::<f64>()
}

/// Trapezoid value of `∫_0^h` of the continuous kernel sampled at spacing
/// `dt` (without renormalization).
pub fn sampled_half_mass(h: f64, dt: f64) -> f64 {
    let mass = bump_mass();
    let steps = (h / dt).floor() as usize;
    let mut s = 0.5 * kernel(0.0, h, mass);
    for j in 1..=steps {
        let t = j as f64 * dt;
        let w = if t >= h { 0.5 } else { 1.0 };
        s += w * kernel(t, h, mass);
    }
    s * dt
}

/// Discrete weights `w_j` for offsets `j = -m..=m`, summing to one.
pub fn kernel_weights(h: f64, dt: f64) -> Vec<f64> {
    let m = (h / dt).ceil() as usize;
    let mut w: Vec<f64> = (0..=2 * m)
        .map(|i| bump((i as f64 - m as f64) * dt / h))
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// `v^h(t_i) = Σ_j w_j v(t_{i-j})`; near the ends the truncated window is
/// renormalized.
pub fn mollify_time<V: Sample>(s: &TimeSeries<V>, h: f64) -> Result<TimeSeries<V>, MollifyError> {
    if s.values.len() < 2 {
        return Err(MollifyError::TooShort);
    }
    let span = s.span();
    if !(h > 0.0 && h < span) {
        return Err(MollifyError::WidthOutOfRange { h, span });
    }
    if h < 2.0 * s.dt {
        return Err(MollifyError::KernelUnresolved { h, min: 2.0 * s.dt });
    }
    let w = kernel_weights(h, s.dt);
    let m = (w.len() - 1) / 2;
    let n = s.values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = s.values[i].zero_like();
        let mut total = 0.0;
        for (jj, &wj) in w.iter().enumerate() {
            let src = i as isize + jj as isize - m as isize;
            if src < 0 || src >= n as isize || wj == 0.0 {
                continue;
            }
            acc.add_scaled(wj, &s.values[src as usize]);
            total += wj;
        }
        let mut v = acc.zero_like();
        v.add_scaled(1.0 / total, &acc);
        out.push(v);
    }
    Ok(TimeSeries {
        t0: s.t0,
        dt: s.dt,
        values: out,
    })
}

/// Index range of nodes whose full kernel window lies inside the series.
pub fn interior_range(len: usize, h: f64, dt: f64) -> std::ops::Range<usize> {
    let m = (h / dt).ceil() as usize;
    if 2 * m >= len {
        0..0
    } else {
        m..len - m
    }
}
