//! Demand-driven spectrum sharing between two coexisting networks.
//!
//! A pool of `n_r` resource blocks is split between networks A and B each
//! step. The split minimises a priority-weighted squared fractional
//! surplus/deficit `J`; the demand history is the context of a one-step
//! bandit. The crate provides:
//!
//! * [`domain`]: demand series, allocations and configuration types.
//! * [`ingest`]: control-channel telemetry to hourly demand.
//! * [`synthgen`]: synthetic demand with matching marginals and persistence.
//! * [`env`]: observation, projection and reward.
//! * [`oracle`]: exact per-step and static-peak solvers plus a grid reference.
//! * [`nn`]: small MLPs with reverse-mode gradients and Adam.
//! * [`agents`]: DDPG and TD3 with replay, target networks and checkpoints.
//! * [`metrics`]: surplus/deficit, Jain fairness, learning curves.
//! * [`harness`]: sweeps, CSV/SVG output and a TCP allocation service.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod domain;
pub mod env;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod synthgen;

pub use agents::{Agent, AgentCheckpoint, AgentConfig, LearningCurve, TrainedPolicy};
pub use domain::{AgentKind, Allocation, DemandSample, DemandSeries, EnvConfig, ExperimentConfig, Side, Trace};
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use oracle::{solve_opt, solve_opt_base, OracleSolution};
