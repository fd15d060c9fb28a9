//! Value types shared by every other module: demand series, allocations and
//! run configuration.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::error::{Error, Result};

/// Header of the canonical demand-series CSV.
pub const SERIES_HEADER: [&str; 3] = ["timestamp", "d_a", "d_b"];

/// Lower bound applied to a demand before it is used as a denominator.
pub fn clamp_demand(d: f64, d_min: f64) -> f64 {
    debug_assert!(d_min > 0.0);
    d.max(d_min)
}

/// Which of the two coexisting networks a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Network A (LTE).
    A,
    /// Network B (NR).
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandSample {
    /// Seconds since the epoch.
    pub timestamp: i64,
    pub d_a: f64,
    pub d_b: f64,
}

impl DemandSample {
    pub fn pair(&self) -> (f64, f64) {
        (self.d_a, self.d_b)
    }
}

/// Uniformly spaced series of per-network PRB demand.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    samples: Vec<DemandSample>,
    granularity: u64,
}

impl DemandSeries {
    pub fn new(samples: Vec<DemandSample>, granularity: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if granularity == 0 {
            return Err(Error::config("granularity must be positive"));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.d_a >= 0.0 && s.d_b >= 0.0) || !s.d_a.is_finite() || !s.d_b.is_finite() {
                return Err(Error::MalformedRow {
                    row: i,
                    reason: format!("demand must be finite and nonnegative, got ({}, {})", s.d_a, s.d_b),
                });
            }
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].timestamp - w[0].timestamp != granularity as i64 {
                return Err(Error::AlignmentMismatch(format!(
                    "timestamps {} and {} at rows {} and {} are not {} s apart",
                    w[0].timestamp,
                    w[1].timestamp,
                    i,
                    i + 1,
                    granularity
                )));
            }
        }
        Ok(Self { samples, granularity })
    }

    /// Builds a series from demand pairs with timestamps `start + k * granularity`.
    pub fn from_pairs(start: i64, granularity: u64, pairs: &[(f64, f64)]) -> Result<Self> {
        let samples = pairs
            .iter()
            .enumerate()
            .map(|(k, &(d_a, d_b))| DemandSample {
                timestamp: start + (k as i64) * granularity as i64,
                d_a,
                d_b,
            })
            .collect();
        Self::new(samples, granularity)
    }

    pub fn samples(&self) -> &[DemandSample] {
        &self.samples
    }

    pub fn granularity(&self) -> u64 {
        self.granularity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn demand(&self, t: usize) -> (f64, f64) {
        self.samples[t].pair()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(DemandSample::pair).collect()
    }

    /// Extracts one network's column as a univariate trace.
    pub fn trace(&self, side: Side) -> Trace {
        let values = self
            .samples
            .iter()
            .map(|s| match side {
                Side::A => s.d_a,
                Side::B => s.d_b,
            })
            .collect();
        Trace {
            start: self.samples[0].timestamp,
            granularity: self.granularity,
            values,
        }
    }

    /// Index splitting the series into a training prefix and an evaluation
    /// suffix holding `eval_split` of the samples.
    pub fn split_index(&self, eval_split: f64) -> usize {
        let train = ((self.len() as f64) * (1.0 - eval_split)).floor() as usize;
        train.min(self.len())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(SERIES_HEADER.iter().copied()) {
            return Err(Error::SchemaMismatch {
                expected: SERIES_HEADER.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |reason: String| Error::MalformedRow { row, reason };
            let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("missing column {}", SERIES_HEADER[i])));
            let timestamp = field(0)?
                .trim()
                .parse::<i64>()
                .map_err(|e| bad(format!("timestamp: {e}")))?;
            let d_a = field(1)?.trim().parse::<f64>().map_err(|e| bad(format!("d_a: {e}")))?;
            let d_b = field(2)?.trim().parse::<f64>().map_err(|e| bad(format!("d_b: {e}")))?;
            samples.push(DemandSample { timestamp, d_a, d_b });
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let granularity = if samples.len() > 1 {
            let g = samples[1].timestamp - samples[0].timestamp;
            if g <= 0 {
                return Err(Error::AlignmentMismatch("timestamps must be strictly increasing".into()));
            }
            g as u64
        } else {
            1
        };
        Self::new(samples, granularity)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", SERIES_HEADER.join(","))?;
        for s in &self.samples {
            writeln!(w, "{},{},{}", s.timestamp, s.d_a, s.d_b)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// A single network's demand over uniformly spaced steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub start: i64,
    pub granularity: u64,
    pub values: Vec<f64>,
}

impl Trace {
    pub fn new(start: i64, granularity: u64, values: Vec<f64>) -> Self {
        Self { start, granularity, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// PRB grants for the two networks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Allocation {
    pub n_a: f64,
    pub n_b: f64,
}

impl Allocation {
    pub fn new(n_a: f64, n_b: f64) -> Self {
        debug_assert!(n_a >= 0.0 && n_b >= 0.0, "negative allocation ({n_a}, {n_b})");
        Self { n_a, n_b }
    }

    pub fn total(&self) -> f64 {
        self.n_a + self.n_b
    }

    /// True when both grants are nonnegative and fit in a pool of `n_r`.
    pub fn is_feasible(&self, n_r: f64) -> bool {
        const EPS: f64 = 1e-9;
        self.n_a >= 0.0 && self.n_b >= 0.0 && self.n_a <= n_r + EPS && self.n_b <= n_r + EPS && self.total() <= n_r + EPS
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.n_a, self.n_b)
    }
}

/// Environment parameters for one pool size and priority setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Pool size in PRB.
    pub n_r: f64,
    /// Priority weight of network A.
    pub zeta: f64,
    /// Surplus/deficit penalty weight in the reward.
    pub eta: f64,
    /// Number of previous demand pairs in each observation.
    pub window_n: usize,
    /// Demand floor used in every fractional denominator.
    pub d_min: f64,
    /// Observation features are demands divided by this.
    pub capacity_norm: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_r: 100.0,
            zeta: 0.5,
            eta: 0.0,
            window_n: 4,
            d_min: 0.1,
            capacity_norm: 100.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_r > 0.0) || !self.n_r.is_finite() {
            return Err(Error::config(format!("n_r must be positive, got {}", self.n_r)));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::config(format!("zeta must lie in [0, 1], got {}", self.zeta)));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::config(format!("eta must be nonnegative, got {}", self.eta)));
        }
        if !(self.d_min > 0.0) {
            return Err(Error::config(format!("d_min must be positive, got {}", self.d_min)));
        }
        if !(self.capacity_norm >= self.n_r) {
            return Err(Error::config(format!(
                "capacity_norm ({}) must be at least n_r ({})",
                self.capacity_norm, self.n_r
            )));
        }
        Ok(())
    }

    pub fn with_pool(mut self, n_r: f64, zeta: f64) -> Self {
        self.n_r = n_r;
        self.zeta = zeta;
        self
    }

    /// Length of the flattened observation vector.
    pub fn obs_dim(&self) -> usize {
        2 * (self.window_n + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Ddpg,
    Td3,
    OptOracle,
    OptBase,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Ddpg, AgentKind::Td3, AgentKind::OptOracle, AgentKind::OptBase];

    pub fn is_learning(self) -> bool {
        matches!(self, AgentKind::Ddpg | AgentKind::Td3)
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Ddpg => "ddpg",
            AgentKind::Td3 => "td3",
            AgentKind::OptOracle => "opt_oracle",
            AgentKind::OptBase => "opt_base",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddpg" => Ok(AgentKind::Ddpg),
            "td3" => Ok(AgentKind::Td3),
            "opt_oracle" | "oracle" => Ok(AgentKind::OptOracle),
            "opt_base" | "base" => Ok(AgentKind::OptBase),
            other => Err(Error::config(format!("unknown agent kind `{other}`"))),
        }
    }
}

/// Everything needed to train and evaluate one agent on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent_kind: AgentKind,
    pub agent: AgentConfig,
    pub seed: u64,
    pub train_steps: usize,
    /// Fraction of the series (its tail) held out for evaluation.
    pub eval_split: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            agent_kind: AgentKind::Td3,
            agent: AgentConfig::default(),
            seed: 42,
            train_steps: 20_000,
            eval_split: 0.2,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        if !(self.eval_split > 0.0 && self.eval_split < 1.0) {
            return Err(Error::config(format!("eval_split must lie in (0, 1), got {}", self.eval_split)));
        }
        if self.train_steps == 0 && self.agent_kind.is_learning() {
            // train() itself accepts zero steps; only configs that drive a run reject it.
            return Err(Error::config("train_steps must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_demand(0.0, 0.5), 0.5);
        assert_eq!(clamp_demand(10.0, 0.5), 10.0);
        assert_eq!(clamp_demand(0.5, 0.5), 0.5);
    }

    proptest! {
        #[test]
        fn clamp_idempotent(d in 0.0f64..1e4, d_min in 1e-6f64..10.0) {
            let once = clamp_demand(d, d_min);
            prop_assert_eq!(clamp_demand(once, d_min), once);
            prop_assert!(once >= d_min);
        }
    }

    #[test]
    fn env_config_rejects_bad_zeta_and_pool() {
        let mut cfg = EnvConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.zeta = 1.2;
        assert!(cfg.validate().is_err());
        cfg.zeta = -0.1;
        assert!(cfg.validate().is_err());
        cfg = EnvConfig { n_r: 0.0, ..EnvConfig::default() };
        assert!(cfg.validate().is_err());
        cfg = EnvConfig { n_r: -5.0, ..EnvConfig::default() };
        assert!(cfg.validate().is_err());
        cfg = EnvConfig { capacity_norm: 50.0, ..EnvConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn series_rejects_uneven_spacing() {
        let s = vec![
            DemandSample { timestamp: 0, d_a: 1.0, d_b: 1.0 },
            DemandSample { timestamp: 3600, d_a: 1.0, d_b: 1.0 },
            DemandSample { timestamp: 7300, d_a: 1.0, d_b: 1.0 },
        ];
        assert!(matches!(DemandSeries::new(s, 3600), Err(Error::AlignmentMismatch(_))));
        assert!(matches!(DemandSeries::new(vec![], 3600), Err(Error::EmptyInput)));
    }

    #[test]
    fn series_csv_round_trip() {
        let s = DemandSeries::from_pairs(100, 60, &[(1.5, 2.25), (0.0, 7.0), (26.31, 25.8)]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,d_a,d_b\n100,1.5,2.25\n"));
        let back = DemandSeries::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn series_csv_rejects_wrong_header() {
        let err = DemandSeries::read_csv("time,a,b\n0,1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
    }

    #[test]
    fn split_index_reserves_tail() {
        let s = DemandSeries::from_pairs(0, 1, &vec![(1.0, 1.0); 10]).unwrap();
        assert_eq!(s.split_index(0.2), 8);
        assert_eq!(s.split_index(0.5), 5);
    }

    #[test]
    fn agent_kind_parses() {
        assert_eq!("TD3".parse::<AgentKind>().unwrap(), AgentKind::Td3);
        assert_eq!("opt_base".parse::<AgentKind>().unwrap(), AgentKind::OptBase);
        assert!("ppo".parse::<AgentKind>().is_err());
    }
}
