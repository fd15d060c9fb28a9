//! Experiment orchestration: configuration files, the pool-size by priority
//! sweep, result emission and the allocation service.

mod emit;
mod service;
pub mod svg;
mod sweep;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use emit::{emit_results, read_sweep_csv, render_sweep_charts, write_sweep_csv, SweepRow, SWEEP_HEADER};
pub use service::{serve, AllocRequest, AllocResponse, AllocationService, Server};
pub use sweep::{cell_seed, evaluate_policy, run_cell, run_sweep, CellResult};

use crate::domain::{AgentKind, DemandSeries, ExperimentConfig};
use crate::error::{Error, Result};

/// Environment variable overriding the base seed.
pub const SEED_ENV: &str = "ADAPSHARE_SEED";

/// The grid of cells to train and evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub n_r_values: Vec<f64>,
    pub zeta_values: Vec<f64>,
    pub agent_kinds: Vec<AgentKind>,
    pub base: ExperimentConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            n_r_values: vec![20.0, 60.0, 100.0],
            zeta_values: (0..=10).map(|i| i as f64 / 10.0).collect(),
            agent_kinds: AgentKind::ALL.to_vec(),
            base: ExperimentConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_r_values.is_empty() || self.zeta_values.is_empty() || self.agent_kinds.is_empty() {
            return Err(Error::config("sweep lists must be nonempty"));
        }
        if let Some(z) = self.zeta_values.iter().find(|z| !(0.0..=1.0).contains(*z)) {
            return Err(Error::config(format!("zeta value {z} outside [0, 1]")));
        }
        if let Some(n) = self.n_r_values.iter().find(|n| !(**n > 0.0)) {
            return Err(Error::config(format!("pool size {n} must be positive")));
        }
        for &n_r in &self.n_r_values {
            let mut env = self.base.env.with_pool(n_r, 0.5);
            env.capacity_norm = env.capacity_norm.max(n_r);
            env.validate()?;
        }
        self.base.agent.validate()?;
        if !(self.base.eval_split > 0.0 && self.base.eval_split < 1.0) {
            return Err(Error::config("eval_split must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Configuration of a single cell.
    pub fn cell_config(&self, n_r: f64, zeta: f64, kind: AgentKind) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        cfg.env = cfg.env.with_pool(n_r, zeta);
        cfg.agent_kind = kind;
        cfg.seed = cell_seed(self.base.seed, n_r, zeta, kind);
        cfg
    }
}

pub fn parse_experiment_toml(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::config(e.to_string()))
}

pub fn parse_sweep_toml(text: &str) -> Result<SweepSpec> {
    toml::from_str(text).map_err(|e| Error::config(e.to_string()))
}

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_experiment_toml(&std::fs::read_to_string(path)?)
}

pub fn load_sweep_spec(path: &Path) -> Result<SweepSpec> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_sweep_toml(&std::fs::read_to_string(path)?)
}

/// Loads a demand series, reporting an absent file as a missing dataset.
pub fn load_dataset(path: &Path) -> Result<DemandSeries> {
    if !path.exists() {
        return Err(Error::DatasetMissing(path.to_path_buf()));
    }
    DemandSeries::load(path)
}

/// Reads the seed override from the environment, if set.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|e| Error::config(format!("{SEED_ENV}={v}: {e}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::config(format!("{SEED_ENV}: {e}"))),
    }
}
