//! Synthetic demand generation.
//!
//! A reference trace is summarised by its empirical quantile table and its
//! lag-1 autocorrelation. New traces are drawn from a Gaussian AR(1) process
//! whose values are pushed through the standard normal CDF and then through
//! the empirical quantile function, so the marginal distribution follows the
//! reference while consecutive steps keep its persistence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{DemandSeries, Side, Trace};
use crate::error::{Error, Result};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandStats {
    /// Reference values in ascending order.
    pub sorted_values: Vec<f64>,
    pub lag1_corr: f64,
    pub length: usize,
    /// Spacing of the reference trace, reused for generated traces.
    pub granularity: u64,
}

impl DemandStats {
    pub fn min(&self) -> f64 {
        self.sorted_values[0]
    }

    /// Largest reference demand.
    pub fn max(&self) -> f64 {
        *self.sorted_values.last().expect("fit guarantees nonempty")
    }

    /// Linear interpolation over the sorted values at probability `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let v = &self.sorted_values;
        let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(v.len() - 1);
        let frac = pos - lo as f64;
        let q = v[lo] + frac * (v[hi] - v[lo]);
        q.clamp(v[0], v[v.len() - 1])
    }
}

/// Pearson correlation of (x_t, x_{t+1}); zero when either lagged half has no variance.
pub fn lag1_autocorrelation(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let x = &values[..values.len() - 1];
    let y = &values[1..];
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

pub fn fit(trace: &Trace) -> Result<DemandStats> {
    if trace.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: trace.len() });
    }
    let mut sorted_values = trace.values.clone();
    sorted_values.sort_by(f64::total_cmp);
    Ok(DemandStats {
        sorted_values,
        lag1_corr: lag1_autocorrelation(&trace.values),
        length: trace.len(),
        granularity: trace.granularity,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn generate(stats: &DemandStats, length: usize, seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = stats.lag1_corr.clamp(-1.0, 1.0);
    let innovation = (1.0 - rho * rho).max(0.0).sqrt();
    let mut values = Vec::with_capacity(length);
    let mut z: f64 = StandardNormal.sample(&mut rng);
    for t in 0..length {
        if t > 0 {
            let eps: f64 = StandardNormal.sample(&mut rng);
            z = rho * z + innovation * eps;
        }
        values.push(stats.quantile(normal_cdf(z)));
    }
    Trace::new(0, stats.granularity, values)
}

/// Synthesises a two-network dataset shaped like `reference`.
///
/// Network A follows the statistics of the reference A column. Network B follows
/// the reference B column, or the A column when `symmetric` is set. The two
/// streams use independent seeds derived from `seed`.
pub fn synthesize_pair(reference: &DemandSeries, length: usize, seed: u64, symmetric: bool) -> Result<DemandSeries> {
    let stats_a = fit(&reference.trace(Side::A))?;
    let stats_b = if symmetric { stats_a.clone() } else { fit(&reference.trace(Side::B))? };
    let a = generate(&stats_a, length, seed);
    let b = generate(&stats_b, length, seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let start = reference.samples()[0].timestamp;
    let pairs: Vec<(f64, f64)> = a.values.into_iter().zip(b.values).collect();
    DemandSeries::from_pairs(start, reference.granularity(), &pairs)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &Trace, b: &Trace) -> Result<f64> {
    ks_statistic(&a.values, &b.values)
}

pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Advance past every copy of the smaller value so ties are handled.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}
