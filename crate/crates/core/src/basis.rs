//! Divergence-free Fourier basis on the periodic torus `[0, 2π)^d`.
//!
//! Every retained wavevector `k` (with `0 < |k|² < n²`) carries `d - 1`
//! real unit polarization vectors orthogonal to `k`. The vectors attached
//! to `k` and `-k` are identical, so Hermitian symmetric coefficients give
//! real-valued physical fields. Wavevectors are ordered lexicographically
//! and modes are ordered by wavevector, then by polarization index.

use std::fmt;

use crate::error::BasisError;

/// Integer wavevector. Unused trailing components are zero in 2D.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveVector(pub [i32; 3]);

impl WaveVector {
    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn neg(&self) -> WaveVector {
        WaveVector([-self.0[0], -self.0[1], -self.0[2]])
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    /// The first nonzero component is positive.
    pub fn is_canonical(&self) -> bool {
        for &c in &self.0 {
            if c != 0 {
                return c > 0;
            }
        }
        false
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

/// One complex degree of freedom: a wavevector and a polarization slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mode {
    pub wave: usize,
    pub pol: usize,
}

/// Enumerated Galerkin basis `H_n` for a given dimension and cutoff.
#[derive(Clone, Debug)]
pub struct BasisIndex {
    d: usize,
    n: usize,
    waves: Vec<WaveVector>,
    norm_sq: Vec<f64>,
    pols: Vec<[[f64; 3]; 2]>,
    conj: Vec<usize>,
    lookup: Vec<u32>,
    span: usize,
}

const ABSENT: u32 = u32::MAX;

pub fn build_basis(d: usize, n: usize) -> Result<BasisIndex, BasisError> {
    BasisIndex::new(d, n)
}

impl BasisIndex {
    pub fn new(d: usize, n: usize) -> Result<Self, BasisError> {
        if d != 2 && d != 3 {
            return Err(BasisError::InvalidDimension(d));
        }
        if n == 0 {
            return Err(BasisError::InvalidCutoff(n));
        }
        if n > 64 {
            return Err(BasisError::CutoffTooLarge(n));
        }
        let kmax = n as i32 - 1;
        let cut = (n * n) as i64;
        let mut waves = Vec::new();
        let range = -kmax..=kmax;
        for a in range.clone() {
            for b in range.clone() {
                let cs: Vec<i32> = if d == 3 { range.clone().collect() } else { vec![0] };
                for c in cs {
                    let k = WaveVector([a, b, c]);
                    let q = k.norm_sq();
                    if q > 0 && q < cut {
                        waves.push(k);
                    }
                }
            }
        }
        // nested loops already produce lexicographic order
        debug_assert!(waves.windows(2).all(|w| w[0] < w[1]));

        let span = (2 * n - 1).max(1);
        let mut lookup = vec![ABSENT; span.pow(d as u32)];
        let offset = kmax;
        let slot = |k: &WaveVector| -> usize {
            let mut idx = 0usize;
            for c in &k.0[..d] {
                idx = idx * span + (c + offset) as usize;
            }
            idx
        };
        for (i, k) in waves.iter().enumerate() {
            lookup[slot(k)] = i as u32;
        }
        let conj = waves
            .iter()
            .map(|k| lookup[slot(&k.neg())] as usize)
            .collect();
        let norm_sq = waves.iter().map(|k| k.norm_sq() as f64).collect();
        let pols = waves.iter().map(|k| polarizations(d, k)).collect();
        Ok(Self {
            d,
            n,
            waves,
            norm_sq,
            pols,
            conj,
            lookup,
            span,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    /// Polarizations per wavevector (`d - 1`).
    pub fn npol(&self) -> usize {
        self.d - 1
    }

    pub fn num_waves(&self) -> usize {
        self.waves.len()
    }

    /// Number of complex modes, counting both members of each conjugate pair.
    pub fn num_modes(&self) -> usize {
        self.waves.len() * self.npol()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }

    pub fn waves(&self) -> &[WaveVector] {
        &self.waves
    }

    pub fn wave(&self, w: usize) -> WaveVector {
        self.waves[w]
    }

    pub fn wave_norm_sq(&self, w: usize) -> f64 {
        self.norm_sq[w]
    }

    pub fn polarization(&self, w: usize, p: usize) -> [f64; 3] {
        self.pols[w][p]
    }

    pub fn conj_wave(&self, w: usize) -> usize {
        self.conj[w]
    }

    pub fn mode(&self, idx: usize) -> Mode {
        let np = self.npol();
        Mode {
            wave: idx / np,
            pol: idx % np,
        }
    }

    pub fn mode_index(&self, wave: usize, pol: usize) -> usize {
        wave * self.npol() + pol
    }

    /// `|k|²` of the wavevector owning mode `idx`.
    pub fn mode_norm_sq(&self, idx: usize) -> f64 {
        self.norm_sq[idx / self.npol()]
    }

    pub fn find(&self, k: &WaveVector) -> Option<usize> {
        let kmax = self.n as i32 - 1;
        let mut idx = 0usize;
        for c in &k.0[..self.d] {
            if c.abs() > kmax {
                return None;
            }
            idx = idx * self.span + (c + kmax) as usize;
        }
        if self.d == 2 && k.0[2] != 0 {
            return None;
        }
        match self.lookup.get(idx) {
            Some(&i) if i != ABSENT => Some(i as usize),
            _ => None,
        }
    }

    /// Largest absolute wavenumber component among retained modes.
    pub fn max_component(&self) -> usize {
        self.n.saturating_sub(1)
    }

    /// Canonical (first nonzero component positive) wavevector indices.
    pub fn canonical_waves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.waves.len()).filter(move |&w| self.waves[w].is_canonical())
    }
}

impl PartialEq for BasisIndex {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.n == other.n
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / s, v[1] / s, v[2] / s]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Polarization vectors of `k`, shared by `k` and `-k`.
fn polarizations(d: usize, k: &WaveVector) -> [[f64; 3]; 2] {
    let kc = if k.is_canonical() { *k } else { k.neg() };
    let kf = kc.as_f64();
    if d == 2 {
        return [normalize([-kf[1], kf[0], 0.0]), [0.0; 3]];
    }
    // least aligned coordinate axis, first on ties
    let mut axis = 0;
    for i in 1..3 {
        if kf[i].abs() < kf[axis].abs() {
            axis = i;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let p1 = normalize(cross(kf, e));
    let p2 = normalize(cross(kf, p1));
    [p1, p2]
}
