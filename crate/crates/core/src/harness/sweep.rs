use crate::agents::{self, LearningCurve, TrainedPolicy};
use crate::domain::{AgentKind, DemandSeries, ExperimentConfig};
use crate::error::Result;
use crate::metrics::EvalReport;

use super::SweepSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub n_r: f64,
    pub zeta: f64,
    pub agent: AgentKind,
    pub report: EvalReport,
    /// Present for learning agents.
    pub curve: Option<LearningCurve>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one sweep cell.
///
/// Folds the base seed, the pool size (bit pattern), the priority weight
/// quantised to a 0.001 grid and the agent kind through SplitMix64. A cell's
/// seed depends only on its own coordinates, so any subset of a sweep
/// reproduces the matching rows of the full sweep.
pub fn cell_seed(base: u64, n_r: f64, zeta: f64, kind: AgentKind) -> u64 {
    let zeta_index = (zeta * 1000.0).round() as u64;
    let kind_tag = kind as u64 + 1;
    [n_r.to_bits(), zeta_index, kind_tag]
        .into_iter()
        .fold(splitmix64(base), |h, v| splitmix64(h ^ v))
}

/// Trains (when the agent learns) and evaluates one configuration on the
/// evaluation split of `series`.
pub fn run_cell(series: &DemandSeries, cfg: &ExperimentConfig) -> Result<CellResult> {
    let (policy, curve) = agents::train(series, cfg)?;
    let mut cell = evaluate_policy(&policy, series, cfg)?;
    cell.curve = cfg.agent_kind.is_learning().then_some(curve);
    Ok(cell)
}

/// Greedy evaluation of an already trained policy on the evaluation split.
pub fn evaluate_policy(policy: &TrainedPolicy, series: &DemandSeries, cfg: &ExperimentConfig) -> Result<CellResult> {
    let (_, eval_idx) = agents::split_ranges(series, cfg)?;
    let ts: Vec<usize> = eval_idx.collect();
    let allocs = agents::greedy_policy(policy, series, cfg)?;
    let demands: Vec<(f64, f64)> = ts.iter().map(|&t| series.demand(t)).collect();
    let report = EvalReport::evaluate(&ts, &allocs, &demands, cfg.env.zeta, cfg.env.d_min, true)?;
    Ok(CellResult { n_r: cfg.env.n_r, zeta: cfg.env.zeta, agent: policy.kind(), report, curve: None })
}

/// Every `(n_r, zeta, agent)` cell in spec order.
pub fn run_sweep(spec: &SweepSpec, series: &DemandSeries) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let cells: Vec<ExperimentConfig> = spec
        .n_r_values
        .iter()
        .flat_map(|&n_r| {
            spec.zeta_values.iter().flat_map(move |&zeta| {
                spec.agent_kinds.iter().map(move |&kind| (n_r, zeta, kind))
            })
        })
        .map(|(n_r, zeta, kind)| {
            let mut cfg = spec.cell_config(n_r, zeta, kind);
            cfg.env.capacity_norm = cfg.env.capacity_norm.max(n_r);
            cfg
        })
        .collect();

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cells.par_iter().map(|cfg| run_cell(series, cfg)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cells.iter().map(|cfg| run_cell(series, cfg)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> DemandSeries {
        let pairs: Vec<_> = (0..60).map(|i| (10.0 + (i % 9) as f64, 14.0 - (i % 4) as f64)).collect();
        DemandSeries::from_pairs(0, 3600, &pairs).unwrap()
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let s = cell_seed(1, 20.0, 0.5, AgentKind::Td3);
        assert_eq!(s, cell_seed(1, 20.0, 0.5, AgentKind::Td3));
        assert_ne!(s, cell_seed(2, 20.0, 0.5, AgentKind::Td3));
        assert_ne!(s, cell_seed(1, 60.0, 0.5, AgentKind::Td3));
        assert_ne!(s, cell_seed(1, 20.0, 0.6, AgentKind::Td3));
        assert_ne!(s, cell_seed(1, 20.0, 0.5, AgentKind::Ddpg));
        // 0.1 + 0.2 and 0.3 land on the same grid point.
        assert_eq!(cell_seed(1, 20.0, 0.1 + 0.2, AgentKind::Td3), cell_seed(1, 20.0, 0.3, AgentKind::Td3));
    }

    #[test]
    fn oracle_only_sweep_has_no_curves() {
        let spec = SweepSpec { agent_kinds: vec![AgentKind::OptOracle], ..SweepSpec::default() };
        let table = run_sweep(&spec, &series()).unwrap();
        assert_eq!(table.len(), 3 * 11);
        assert!(table.iter().all(|c| c.curve.is_none() && c.agent == AgentKind::OptOracle));
        // Demand never exceeds 60 + 100, so the larger pools serve it exactly.
        assert!(table.iter().filter(|c| c.n_r >= 60.0).all(|c| c.report.mean_j == 0.0));
    }

    #[test]
    fn subset_rows_match_full_sweep() {
        let mut base = ExperimentConfig::default();
        base.train_steps = 120;
        base.agent.warmup_steps = 40;
        base.agent.hidden = vec![8];
        base.agent.batch_size = 16;
        let full = SweepSpec {
            n_r_values: vec![20.0, 60.0],
            zeta_values: vec![0.2, 0.5],
            agent_kinds: vec![AgentKind::Ddpg, AgentKind::OptBase],
            base,
        };
        let subset = SweepSpec { n_r_values: vec![60.0], zeta_values: vec![0.5], ..full.clone() };
        let a = run_sweep(&full, &series()).unwrap();
        let b = run_sweep(&subset, &series()).unwrap();
        for cell in &b {
            let twin = a
                .iter()
                .find(|c| c.n_r == cell.n_r && c.zeta == cell.zeta && c.agent == cell.agent)
                .unwrap();
            assert_eq!(twin, cell);
        }
    }
}
