//! Evaluation metrics: mean fractional surplus/deficit per network, Jain's
//! fairness index over the two grants, and learning-curve smoothing.

use serde::{Deserialize, Serialize};

use crate::domain::{clamp_demand, Allocation};
use crate::env::objective_j;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDetail {
    pub t: usize,
    pub allocation: Allocation,
    pub demand: (f64, f64),
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub s_a: f64,
    pub s_b: f64,
    pub fairness: f64,
    pub mean_j: f64,
    /// Steps where both grants were zero; each counts as fairness 1.
    pub zero_allocation_steps: usize,
    pub per_step: Option<Vec<StepDetail>>,
}

impl EvalReport {
    /// Builds the report for allocations `allocs[k]` made at time `ts[k]`.
    pub fn evaluate(
        ts: &[usize],
        allocs: &[Allocation],
        demands: &[(f64, f64)],
        zeta: f64,
        d_min: f64,
        keep_steps: bool,
    ) -> Result<Self> {
        if ts.len() != allocs.len() {
            return Err(Error::LengthMismatch(ts.len(), allocs.len()));
        }
        let (s_a, s_b) = surplus_deficit(allocs, demands, d_min)?;
        let per_step = keep_steps.then(|| {
            ts.iter()
                .zip(allocs)
                .zip(demands)
                .map(|((&t, &allocation), &demand)| StepDetail {
                    t,
                    allocation,
                    demand,
                    j: objective_j(allocation, demand, zeta, d_min),
                })
                .collect()
        });
        Ok(Self {
            s_a,
            s_b,
            fairness: jain_fairness(allocs)?,
            mean_j: mean_objective(allocs, demands, zeta, d_min)?,
            zero_allocation_steps: allocs.iter().filter(|a| a.n_a == 0.0 && a.n_b == 0.0).count(),
            per_step,
        })
    }
}

/// Mean of `(n - d) / d` for each network, demands clamped to `d_min`.
pub fn surplus_deficit(allocs: &[Allocation], demands: &[(f64, f64)], d_min: f64) -> Result<(f64, f64)> {
    if allocs.len() != demands.len() {
        return Err(Error::LengthMismatch(allocs.len(), demands.len()));
    }
    if allocs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut sa, mut sb) = (0.0, 0.0);
    for (al, &(da, db)) in allocs.iter().zip(demands) {
        let da = clamp_demand(da, d_min);
        let db = clamp_demand(db, d_min);
        sa += (al.n_a - da) / da;
        sb += (al.n_b - db) / db;
    }
    let t = allocs.len() as f64;
    Ok((sa / t, sb / t))
}

/// Per-step Jain index of the two grants.
pub fn jain_step(alloc: Allocation) -> f64 {
    let denom = 2.0 * (alloc.n_a * alloc.n_a + alloc.n_b * alloc.n_b);
    if denom == 0.0 {
        // Both starved: treated as equal shares.
        return 1.0;
    }
    let s = alloc.n_a + alloc.n_b;
    s * s / denom
}

pub fn jain_fairness(allocs: &[Allocation]) -> Result<f64> {
    if allocs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(allocs.iter().copied().map(jain_step).sum::<f64>() / allocs.len() as f64)
}

pub fn mean_objective(allocs: &[Allocation], demands: &[(f64, f64)], zeta: f64, d_min: f64) -> Result<f64> {
    if allocs.len() != demands.len() {
        return Err(Error::LengthMismatch(allocs.len(), demands.len()));
    }
    if allocs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = allocs
        .iter()
        .zip(demands)
        .map(|(&a, &d)| objective_j(a, d, zeta, d_min))
        .sum();
    Ok(total / allocs.len() as f64)
}

/// Trailing mean over at most `window` values, expanding at the head.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if window == 0 {
        return Err(Error::config("moving-average window must be at least 1"));
    }
    let out = (0..values.len())
        .map(|i| {
            let w = &values[(i + 1).saturating_sub(window)..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect();
    Ok(out)
}
