//! Contextual-bandit environment over a demand series.
//!
//! Each decision is a single-step episode: the agent sees the current and
//! `window_n` previous demand pairs, proposes a fraction of the pool for each
//! network, and is scored by the weighted squared fractional mismatch `J`.
//! Nothing the agent does changes future demand.

use serde::{Deserialize, Serialize};

use crate::domain::{clamp_demand, Allocation, DemandSeries, EnvConfig};
use crate::error::{Error, Result};

/// Normalised demand history, most recent pair first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pairs: Vec<(f64, f64)>,
}

impl Observation {
    /// Builds an observation from raw demands (most recent first).
    pub fn from_history(history: &[(f64, f64)], window_n: usize, capacity_norm: f64) -> Result<Self> {
        if history.len() < window_n + 1 {
            return Err(Error::TooShort { needed: window_n + 1, got: history.len() });
        }
        let pairs = history[..=window_n]
            .iter()
            .map(|&(a, b)| (a.max(0.0) / capacity_norm, b.max(0.0) / capacity_norm))
            .collect();
        Ok(Self { pairs })
    }

    /// Flattened as `[a_t, b_t, a_{t-1}, b_{t-1}, ...]`.
    pub fn features(&self) -> Vec<f64> {
        self.pairs.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn dim(&self) -> usize {
        2 * self.pairs.len()
    }
}

/// Actor output before it is mapped onto the pool: fractions of `n_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawAction {
    pub u_a: f64,
    pub u_b: f64,
}

impl RawAction {
    /// Clips both components into [0, 1].
    pub fn new(u_a: f64, u_b: f64) -> Self {
        Self { u_a: u_a.clamp(0.0, 1.0), u_b: u_b.clamp(0.0, 1.0) }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.u_a, self.u_b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub allocation: Allocation,
    pub j_value: f64,
    pub reward: f64,
}

/// Weighted sum of squared fractional surplus/deficit.
pub fn objective_j(alloc: Allocation, demand: (f64, f64), zeta: f64, d_min: f64) -> f64 {
    let a = clamp_demand(demand.0, d_min);
    let b = clamp_demand(demand.1, d_min);
    let ea = (alloc.n_a - a) / a;
    let eb = (alloc.n_b - b) / b;
    zeta * ea * ea + (1.0 - zeta) * eb * eb
}

pub fn reward(j: f64, eta: f64) -> f64 {
    -j - eta * j
}

/// Scales the raw fractions onto the pool, shrinking both radially onto the
/// budget line when their sum exceeds it.
pub fn project_action(raw: RawAction, n_r: f64) -> Allocation {
    let n_a = raw.u_a.clamp(0.0, 1.0) * n_r;
    let n_b = raw.u_b.clamp(0.0, 1.0) * n_r;
    let sum = n_a + n_b;
    if sum > n_r {
        let s = n_r / sum;
        Allocation::new((n_a * s).min(n_r), (n_b * s).min(n_r))
    } else {
        Allocation::new(n_a, n_b)
    }
}

/// First index with a full history window.
pub fn first_valid_index(cfg: &EnvConfig) -> usize {
    cfg.window_n
}

pub fn observe(series: &DemandSeries, t: usize, cfg: &EnvConfig) -> Result<Observation> {
    if t < cfg.window_n || t >= series.len() {
        return Err(Error::IndexOutOfRange { index: t, min: cfg.window_n, max: series.len() });
    }
    let pairs = (0..=cfg.window_n)
        .map(|k| {
            let (a, b) = series.demand(t - k);
            (a / cfg.capacity_norm, b / cfg.capacity_norm)
        })
        .collect();
    Ok(Observation { pairs })
}

pub fn step(series: &DemandSeries, t: usize, raw: RawAction, cfg: &EnvConfig) -> Result<StepResult> {
    if t < cfg.window_n || t >= series.len() {
        return Err(Error::IndexOutOfRange { index: t, min: cfg.window_n, max: series.len() });
    }
    let allocation = project_action(raw, cfg.n_r);
    let j_value = objective_j(allocation, series.demand(t), cfg.zeta, cfg.d_min);
    Ok(StepResult { allocation, j_value, reward: reward(j_value, cfg.eta) })
}
