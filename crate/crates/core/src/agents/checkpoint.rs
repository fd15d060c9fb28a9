//! JSON checkpoint of a learned agent.
//!
//! ```text
//! {
//!   "format": "adapshare-agent",
//!   "version": 1,
//!   "agent_kind": "td3",
//!   "env": { "n_r": 60.0, "zeta": 0.5, ... },
//!   "agent": { "actor_lr": 0.0001, ... },
//!   "actor": { "dims": [10, 64, 64, 2], "activations": ["relu", "relu", "sigmoid"], "params": [...] },
//!   "critics": [ { "dims": [...], "activations": [...], "params": [...] }, ... ]
//! }
//! ```
//!
//! `params` is the flat parameter buffer of [`Mlp`]: per layer, the row-major
//! `out x in` weights followed by the biases. Floats are written in shortest
//! round-trip form, so save/load is lossless. Target networks and optimizer
//! moments are not stored; a loaded agent starts with targets equal to the
//! online networks.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentConfig};
use crate::domain::{AgentKind, EnvConfig};
use crate::error::{Error, Result};
use crate::nn::Mlp;

pub const CHECKPOINT_FORMAT: &str = "adapshare-agent";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format: String,
    pub version: u32,
    pub agent_kind: AgentKind,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub actor: Mlp,
    pub critics: Vec<Mlp>,
}

impl AgentCheckpoint {
    pub fn from_agent(agent: &Agent) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            agent_kind: agent.kind,
            env: agent.env,
            agent: agent.cfg.clone(),
            actor: agent.actor.clone(),
            critics: agent.critics.clone(),
        }
    }

    pub fn into_agent(self) -> Result<Agent> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::CheckpointInvalid(format!("unknown format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointInvalid(format!("unsupported version {}", self.version)));
        }
        let expected_critics = match self.agent_kind {
            AgentKind::Ddpg => 1,
            AgentKind::Td3 => 2,
            other => return Err(Error::CheckpointInvalid(format!("{other} has no learned parameters"))),
        };
        self.env.validate().map_err(|e| Error::CheckpointInvalid(e.to_string()))?;
        let obs_dim = self.env.obs_dim();
        // Re-validate shapes: serde fills the fields without checking them.
        let actor = Mlp::from_parts(self.actor.dims().to_vec(), self.actor.activations().to_vec(), self.actor.params().to_vec())
            .map_err(|e| Error::CheckpointInvalid(format!("actor: {e}")))?;
        if actor.input_dim() != obs_dim || actor.output_dim() != 2 {
            return Err(Error::CheckpointInvalid(format!(
                "actor maps {} -> {}, expected {} -> 2",
                actor.input_dim(),
                actor.output_dim(),
                obs_dim
            )));
        }
        if self.critics.len() != expected_critics {
            return Err(Error::CheckpointInvalid(format!(
                "{} critics for {}, expected {}",
                self.critics.len(),
                self.agent_kind,
                expected_critics
            )));
        }
        let critics = self
            .critics
            .iter()
            .map(|c| {
                let net = Mlp::from_parts(c.dims().to_vec(), c.activations().to_vec(), c.params().to_vec())
                    .map_err(|e| Error::CheckpointInvalid(format!("critic: {e}")))?;
                if net.input_dim() != obs_dim + 2 || net.output_dim() != 1 {
                    return Err(Error::CheckpointInvalid("critic shape does not match the observation".into()));
                }
                Ok(net)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Agent::assemble(self.agent_kind, self.env, self.agent, actor, critics, ChaCha8Rng::seed_from_u64(0)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::CheckpointInvalid(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Agent {
    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint::from_agent(self)
    }
}
