//! Exact per-step solutions of the allocation problem.
//!
//! When both clamped demands fit in the pool the optimum is the demand
//! itself. Otherwise `J` is decreasing in each coordinate below demand, so the
//! optimum sits on the budget line `n_a + n_b = n_r` and the remaining 1-D
//! convex quadratic has a closed-form stationary point, clamped to the pool.

use serde::{Deserialize, Serialize};

use crate::domain::{clamp_demand, Allocation};
use crate::env::objective_j;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub allocation: Allocation,
    pub j_value: f64,
    /// True when demand exceeds the pool and the budget line binds.
    pub constraint_active: bool,
}

/// Unclamped minimiser of `J` along `n_a + n_b = n_r`, for `0 < zeta < 1`.
pub fn budget_line_stationary_point(a: f64, b: f64, zeta: f64, n_r: f64) -> f64 {
    let wa = zeta * b * b;
    let wb = (1.0 - zeta) * a * a;
    (wa * a + wb * (n_r - b)) / (wa + wb)
}

pub fn solve_opt(demand: (f64, f64), zeta: f64, n_r: f64, d_min: f64) -> OracleSolution {
    let a = clamp_demand(demand.0, d_min);
    let b = clamp_demand(demand.1, d_min);
    let finish = |alloc: Allocation, constraint_active: bool| OracleSolution {
        allocation: alloc,
        j_value: objective_j(alloc, demand, zeta, d_min),
        constraint_active,
    };

    if a + b <= n_r {
        return finish(Allocation::new(a, b), false);
    }
    let alloc = if zeta >= 1.0 {
        let n_a = a.min(n_r);
        Allocation::new(n_a, b.min(n_r - n_a))
    } else if zeta <= 0.0 {
        let n_b = b.min(n_r);
        Allocation::new(a.min(n_r - n_b), n_b)
    } else {
        let n_a = budget_line_stationary_point(a, b, zeta, n_r).clamp(0.0, n_r);
        Allocation::new(n_a, (n_r - n_a).max(0.0))
    };
    finish(alloc, true)
}

/// Static baseline: the same problem solved once against per-network maxima.
pub fn solve_opt_base(max_demand: (f64, f64), zeta: f64, n_r: f64, d_min: f64) -> OracleSolution {
    solve_opt(max_demand, zeta, n_r, d_min)
}

/// Per-network maximum demand over a slice of demand pairs.
pub fn max_demands(pairs: &[(f64, f64)]) -> (f64, f64) {
    pairs
        .iter()
        .fold((0.0f64, 0.0f64), |(ma, mb), &(a, b)| (ma.max(a), mb.max(b)))
}

/// Brute-force minimiser of `J` over the lattice `{(i*step, k*step) : i*step + k*step <= n_r}`.
///
/// `J` splits into a term in `n_a` plus a term in `n_b`, so for every `i` the best
/// admissible `k` is a prefix minimum of the `n_b` term. This visits the same
/// candidates as the double loop and keeps its lexicographic tie-breaking
/// (smallest `n_a`, then smallest `n_b`), in `O(n_r / step)` time.
pub fn grid_solve(demand: (f64, f64), zeta: f64, n_r: f64, d_min: f64, step: f64) -> OracleSolution {
    assert!(step > 0.0, "grid step must be positive");
    let a = clamp_demand(demand.0, d_min);
    let b = clamp_demand(demand.1, d_min);
    let m = (n_r / step + 1e-9).floor() as usize;
    let term_a = |i: usize| {
        let e = (i as f64 * step - a) / a;
        zeta * e * e
    };
    let term_b = |k: usize| {
        let e = (k as f64 * step - b) / b;
        (1.0 - zeta) * e * e
    };

    // best_b[k] = argmin of term_b over 0..=k, earliest on ties.
    let mut best_b = Vec::with_capacity(m + 1);
    let mut arg = 0usize;
    let mut val = term_b(0);
    for k in 0..=m {
        let v = term_b(k);
        if v < val {
            val = v;
            arg = k;
        }
        best_b.push((arg, val));
    }

    let mut best = (0usize, best_b[m].0);
    let mut best_val = term_a(0) + best_b[m].1;
    for i in 1..=m {
        // Largest k with i*step + k*step <= n_r.
        let kmax = m - i;
        let (k, vb) = best_b[kmax];
        let v = term_a(i) + vb;
        if v < best_val {
            best_val = v;
            best = (i, k);
        }
    }
    let alloc = Allocation::new(best.0 as f64 * step, best.1 as f64 * step);
    OracleSolution {
        allocation: alloc,
        j_value: objective_j(alloc, demand, zeta, d_min),
        constraint_active: a + b > n_r,
    }
}

/// Exhaustive double loop over the same lattice as [`grid_solve`]; quadratic in `n_r / step`.
pub fn grid_solve_exhaustive(demand: (f64, f64), zeta: f64, n_r: f64, d_min: f64, step: f64) -> OracleSolution {
    assert!(step > 0.0, "grid step must be positive");
    let a = clamp_demand(demand.0, d_min);
    let b = clamp_demand(demand.1, d_min);
    let m = (n_r / step + 1e-9).floor() as usize;
    let mut best = (0usize, 0usize);
    let mut best_val = f64::INFINITY;
    for i in 0..=m {
        for k in 0..=(m - i) {
            let ea = (i as f64 * step - a) / a;
            let eb = (k as f64 * step - b) / b;
            let v = zeta * ea * ea + (1.0 - zeta) * eb * eb;
            if v < best_val {
                best_val = v;
                best = (i, k);
            }
        }
    }
    let alloc = Allocation::new(best.0 as f64 * step, best.1 as f64 * step);
    OracleSolution {
        allocation: alloc,
        j_value: objective_j(alloc, demand, zeta, d_min),
        constraint_active: a + b > n_r,
    }
}
