//! Small statistics toolkit for Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn summary(&self) -> Estimate {
        let se = self.std_error();
        Estimate {
            mean: self.mean,
            std_error: se,
            ci_low: self.mean - Z95 * se,
            ci_high: self.mean + Z95 * se,
            samples: self.n,
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean with its standard error and a 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        xs.iter().copied().collect::<Welford>().summary()
    }

    /// `|mean - target|` in units of the standard error (infinite when the
    /// error is zero and the mean is off target).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            d / self.std_error
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    slope(&lx, &ly)
}

/// Chi-square goodness of fit of observed counts against a Poisson law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareFit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub bins: usize,
}

/// Bins `0, 1, ...` are merged from both tails until every expected count
/// is at least 5.
pub fn poisson_chi_square(counts: &[u64], mean: f64) -> ChiSquareFit {
    let total = counts.len() as f64;
    let kmax = counts.iter().copied().max().unwrap_or(0) as usize;
    let law = Poisson::new(mean.max(1e-300)).expect("positive mean");
    let mut observed = vec![0u64; kmax + 1];
    for &c in counts {
        observed[c as usize] += 1;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    let mut cdf = 0.0;
    for (k, &obs) in observed.iter().enumerate() {
        let p = law.pmf(k as u64);
        cdf += p;
        o += obs as f64;
        e += p * total;
        if e >= 5.0 && (1.0 - cdf) * total >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    // upper tail carries the remaining probability mass
    e += (1.0 - cdf).max(0.0) * total;
    match bins.last_mut() {
        Some(last) if e < 5.0 => {
            last.0 += o;
            last.1 += e;
        }
        _ => bins.push((o, e)),
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("dof > 0").sf(statistic)
    };
    ChiSquareFit {
        statistic,
        degrees_of_freedom: dof,
        p_value,
        bins: bins.len(),
    }
}
