//! Browser bindings: solve one allocation, sweep the priority weight for the
//! exact and static-peak solvers, and synthesise demand.

use adapshare::metrics::{jain_fairness, surplus_deficit};
use adapshare::oracle::{max_demands, solve_opt, solve_opt_base};
use adapshare::synthgen::{ks_distance, synthesize_pair};
use adapshare::{env::objective_j, Allocation, DemandSeries, Side};
use wasm_bindgen::prelude::*;

const D_MIN: f64 = 0.1;
const REFERENCE_CSV: &str = include_str!("../../core/fixtures/demand_hourly.csv");

fn reference() -> DemandSeries {
    DemandSeries::read_csv(REFERENCE_CSV.as_bytes()).expect("bundled series parses")
}

/// Exact split for one step: `[n_a, n_b, J, constraint_active]`.
#[wasm_bindgen]
pub fn solve(d_a: f64, d_b: f64, zeta: f64, n_r: f64) -> Vec<f64> {
    let s = solve_opt((d_a, d_b), zeta.clamp(0.0, 1.0), n_r.max(0.0), D_MIN);
    vec![s.allocation.n_a, s.allocation.n_b, s.j_value, if s.constraint_active { 1.0 } else { 0.0 }]
}

/// `J` along the budget line `n_a + n_b = n_r`, sampled at `points` values of `n_a`.
#[wasm_bindgen]
pub fn objective_profile(d_a: f64, d_b: f64, zeta: f64, n_r: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let x = n_r * i as f64 / (points - 1) as f64;
            objective_j(Allocation::new(x, n_r - x), (d_a, d_b), zeta, D_MIN)
        })
        .collect()
}

/// For zeta = 0, 0.1, ..., 1 on a synthetic series of `len` steps:
/// rows of `[zeta, oracle S_a, oracle S_b, oracle fairness, base S_a, base S_b, base fairness]`.
///
/// The static baseline is solved once against the per-network maxima of the series.
#[wasm_bindgen]
pub fn zeta_sweep(n_r: f64, len: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let series = synthesize_pair(&reference(), len.max(2), seed, false)?;
    let demands = series.pairs();
    let peak = max_demands(&demands);
    let mut out = Vec::with_capacity(11 * 7);
    for i in 0..=10 {
        let zeta = i as f64 / 10.0;
        let oracle: Vec<Allocation> = demands.iter().map(|&d| solve_opt(d, zeta, n_r, D_MIN).allocation).collect();
        let base = vec![solve_opt_base(peak, zeta, n_r, D_MIN).allocation; demands.len()];
        out.push(zeta);
        for allocs in [&oracle, &base] {
            let (sa, sb) = surplus_deficit(allocs, &demands, D_MIN)?;
            out.extend([sa, sb, jain_fairness(allocs)?]);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub struct SynthResult {
    a: Vec<f64>,
    b: Vec<f64>,
    ks_a: f64,
    ks_b: f64,
}

#[wasm_bindgen]
impl SynthResult {
    #[wasm_bindgen(getter)]
    pub fn a(&self) -> Vec<f64> {
        self.a.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn b(&self) -> Vec<f64> {
        self.b.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn ks_a(&self) -> f64 {
        self.ks_a
    }

    #[wasm_bindgen(getter)]
    pub fn ks_b(&self) -> f64 {
        self.ks_b
    }

    /// The bundled reference series, network A then B.
    #[wasm_bindgen(getter)]
    pub fn reference_a(&self) -> Vec<f64> {
        reference().trace(Side::A).values
    }

    #[wasm_bindgen(getter)]
    pub fn reference_b(&self) -> Vec<f64> {
        reference().trace(Side::B).values
    }
}

/// Synthetic demand shaped like the bundled reference series.
#[wasm_bindgen]
pub fn synth(len: usize, seed: u64) -> Result<SynthResult, JsError> {
    let reference = reference();
    let series = synthesize_pair(&reference, len.max(1), seed, false)?;
    let (a, b) = (series.trace(Side::A), series.trace(Side::B));
    Ok(SynthResult {
        ks_a: ks_distance(&a, &reference.trace(Side::A))?,
        ks_b: ks_distance(&b, &reference.trace(Side::B))?,
        a: a.values,
        b: b.values,
    })
}
