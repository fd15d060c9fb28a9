//! DDPG and TD3 over the allocation bandit.
//!
//! Both agents share one actor (observation -> two pool fractions through a
//! sigmoid head) and one or two critics scoring `(observation, fractions)`.
//! Episodes last a single step, so the critic regresses the immediate reward;
//! a discounted bootstrap term is only added when `gamma > 0`.

mod checkpoint;
mod replay;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use checkpoint::{AgentCheckpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use replay::{ReplayBuffer, Transition};

use crate::domain::{Allocation, AgentKind, DemandSeries, EnvConfig, ExperimentConfig};
use crate::env::{self, Observation, RawAction};
use crate::error::{Error, Result};
use crate::metrics::moving_average;
use crate::nn::{soft_update, Activation, AdamState, Mlp};
use crate::oracle::{max_demands, solve_opt, solve_opt_base};

/// Smoothing window of the reported learning curve.
pub const CURVE_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Actor learning rate.
    pub actor_lr: f64,
    /// Critic learning rate.
    pub critic_lr: f64,
    pub gamma: f64,
    /// Target-network averaging rate.
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Std of the Gaussian exploration noise, in pool-fraction units.
    pub explore_sigma: f64,
    /// Multiplicative decay applied to the exploration std after every step.
    pub sigma_decay: f64,
    pub td3_policy_delay: u64,
    pub td3_target_noise: f64,
    pub td3_noise_clip: f64,
    /// Environment steps before the first gradient update.
    pub warmup_steps: usize,
    /// Hidden layer widths shared by actor and critics.
    pub hidden: Vec<usize>,
    /// Supervised steps regressing the actor onto oracle allocations before RL.
    pub pretrain_steps: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.0,
            tau: 0.005,
            batch_size: 64,
            buffer_capacity: 50_000,
            explore_sigma: 0.2,
            sigma_decay: 0.9995,
            td3_policy_delay: 2,
            td3_target_noise: 0.1,
            td3_noise_clip: 0.3,
            warmup_steps: 500,
            hidden: vec![64, 64],
            pretrain_steps: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::config(msg)) };
        check(self.actor_lr > 0.0 && self.critic_lr > 0.0, "learning rates must be positive")?;
        check((0.0..=1.0).contains(&self.gamma), "gamma must lie in [0, 1]")?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau must lie in (0, 1]")?;
        check(self.batch_size >= 1, "batch_size must be at least 1")?;
        check(self.buffer_capacity >= 1, "buffer_capacity must be at least 1")?;
        check(self.explore_sigma >= 0.0, "explore_sigma must be nonnegative")?;
        check(self.sigma_decay > 0.0 && self.sigma_decay <= 1.0, "sigma_decay must lie in (0, 1]")?;
        check(self.td3_policy_delay >= 1, "td3_policy_delay must be at least 1")?;
        check(self.td3_target_noise >= 0.0 && self.td3_noise_clip >= 0.0, "TD3 noise parameters must be nonnegative")?;
        check(self.hidden.iter().all(|&h| h > 0), "hidden widths must be positive")?;
        Ok(())
    }
}

/// Losses from one update call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Mean squared error of the first critic.
    pub critic_loss: f64,
    /// Mean squared error of the second critic (TD3 only).
    pub critic2_loss: Option<f64>,
    /// Mean `Q(s, mu(s))` over the batch when the actor was updated.
    pub actor_objective: Option<f64>,
}

/// TD target with clipped double-Q: `reward + gamma * min(q1, q2)`.
pub fn td3_target(reward: f64, q1: f64, q2: f64, gamma: f64) -> f64 {
    reward + gamma * q1.min(q2)
}

#[derive(Debug, Clone)]
pub struct Agent {
    kind: AgentKind,
    env: EnvConfig,
    cfg: AgentConfig,
    actor: Mlp,
    actor_target: Mlp,
    critics: Vec<Mlp>,
    critic_targets: Vec<Mlp>,
    actor_opt: AdamState,
    critic_opts: Vec<AdamState>,
    sigma: f64,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(kind: AgentKind, env: EnvConfig, cfg: AgentConfig, seed: u64) -> Result<Self> {
        let n_critics = match kind {
            AgentKind::Ddpg => 1,
            AgentKind::Td3 => 2,
            other => return Err(Error::config(format!("{other} is not a learning agent"))),
        };
        env.validate()?;
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs_dim = env.obs_dim();
        let actor = Mlp::with_hidden(obs_dim, &cfg.hidden, 2, Activation::Sigmoid, &mut rng)?;
        let critics = (0..n_critics)
            .map(|_| Mlp::with_hidden(obs_dim + 2, &cfg.hidden, 1, Activation::Identity, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(kind, env, cfg, actor, critics, rng))
    }

    fn assemble(kind: AgentKind, env: EnvConfig, cfg: AgentConfig, actor: Mlp, critics: Vec<Mlp>, rng: ChaCha8Rng) -> Self {
        let actor_opt = AdamState::new(actor.num_params(), cfg.actor_lr);
        let critic_opts = critics.iter().map(|c| AdamState::new(c.num_params(), cfg.critic_lr)).collect();
        Self {
            kind,
            env,
            sigma: cfg.explore_sigma,
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            actor_opt,
            critic_opts,
            cfg,
            rng,
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critics(&self) -> &[Mlp] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [Mlp] {
        &mut self.critics
    }

    pub fn set_critic(&mut self, index: usize, net: Mlp) -> Result<()> {
        if !self.critics[index].same_architecture(&net) {
            return Err(Error::ArchitectureMismatch);
        }
        self.critic_targets[index] = net.clone();
        self.critics[index] = net;
        Ok(())
    }

    pub fn exploration_sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_exploration_sigma(&mut self, sigma: f64) {
        self.sigma = sigma.max(0.0);
    }

    /// Deterministic actor output.
    pub fn policy(&self, obs: &Observation) -> Result<RawAction> {
        let out = self.actor.forward(&obs.features())?;
        Ok(RawAction::new(out[0], out[1]))
    }

    pub fn act(&mut self, obs: &Observation, explore: bool) -> Result<RawAction> {
        let base = self.policy(obs)?;
        if !explore || self.sigma == 0.0 {
            return Ok(base);
        }
        let noise = Normal::new(0.0, self.sigma).map_err(|e| Error::config(e.to_string()))?;
        let u_a = base.u_a + noise.sample(&mut self.rng);
        let u_b = base.u_b + noise.sample(&mut self.rng);
        Ok(RawAction::new(u_a, u_b))
    }

    fn decay_sigma(&mut self) {
        self.sigma *= self.cfg.sigma_decay;
    }

    fn critic_input(features: &[f64], action: [f64; 2]) -> Vec<f64> {
        let mut x = Vec::with_capacity(features.len() + 2);
        x.extend_from_slice(features);
        x.extend_from_slice(&action);
        x
    }

    /// Regression targets for the critics. The bootstrap term (`gamma > 0`)
    /// evaluates the target networks at the stored context, the only context a
    /// single-step transition carries.
    fn targets(&mut self, batch: &[&Transition], features: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.cfg.gamma == 0.0 {
            return Ok(batch.iter().map(|t| t.reward).collect());
        }
        let smoothing = match self.kind {
            AgentKind::Td3 if self.cfg.td3_target_noise > 0.0 => {
                Some(Normal::new(0.0, self.cfg.td3_target_noise).map_err(|e| Error::config(e.to_string()))?)
            }
            _ => None,
        };
        let clip = self.cfg.td3_noise_clip;
        let mut ys = Vec::with_capacity(batch.len());
        for (t, f) in batch.iter().zip(features) {
            let mut a = self.actor_target.forward(f)?;
            if let Some(noise) = &smoothing {
                for v in a.iter_mut() {
                    let eps: f64 = noise.sample(&mut self.rng);
                    *v = (*v + eps.clamp(-clip, clip)).clamp(0.0, 1.0);
                }
            }
            let x = Self::critic_input(f, [a[0], a[1]]);
            let q1 = self.critic_targets[0].forward(&x)?[0];
            let y = if self.critic_targets.len() > 1 {
                let q2 = self.critic_targets[1].forward(&x)?[0];
                td3_target(t.reward, q1, q2, self.cfg.gamma)
            } else {
                t.reward + self.cfg.gamma * q1
            };
            ys.push(y);
        }
        Ok(ys)
    }

    fn fit_critic(&mut self, index: usize, batch: &[&Transition], features: &[Vec<f64>], ys: &[f64]) -> Result<f64> {
        let critic = &self.critics[index];
        let scale = 1.0 / batch.len() as f64;
        let mut grads = vec![0.0; critic.num_params()];
        let mut loss = 0.0;
        for ((t, f), &y) in batch.iter().zip(features).zip(ys) {
            let x = Self::critic_input(f, t.raw_action.as_array());
            let cache = critic.forward_cached(&x)?;
            let diff = cache.output()[0] - y;
            loss += diff * diff;
            critic.backward_into(&cache, &[2.0 * diff * scale], &mut grads)?;
        }
        self.critic_opts[index].step(self.critics[index].params_mut(), &grads)?;
        Ok(loss * scale)
    }

    /// Deterministic policy gradient through the first critic.
    fn fit_actor(&mut self, features: &[Vec<f64>]) -> Result<f64> {
        let scale = 1.0 / features.len() as f64;
        let mut grads = vec![0.0; self.actor.num_params()];
        let mut objective = 0.0;
        for f in features {
            let actor_cache = self.actor.forward_cached(f)?;
            let u = actor_cache.output();
            let x = Self::critic_input(f, [u[0], u[1]]);
            let critic_cache = self.critics[0].forward_cached(&x)?;
            objective += critic_cache.output()[0];
            let dq_dx = self.critics[0].input_gradient(&critic_cache, &[1.0])?;
            let n = f.len();
            // Ascend Q: the optimizer descends, so feed it -dQ/du.
            let upstream = [-dq_dx[n] * scale, -dq_dx[n + 1] * scale];
            self.actor.backward_into(&actor_cache, &upstream, &mut grads)?;
        }
        self.actor_opt.step(self.actor.params_mut(), &grads)?;
        Ok(objective * scale)
    }

    fn update_targets(&mut self) -> Result<()> {
        let tau = self.cfg.tau;
        soft_update(&mut self.actor_target, &self.actor, tau)?;
        for (target, online) in self.critic_targets.iter_mut().zip(&self.critics) {
            soft_update(target, online, tau)?;
        }
        Ok(())
    }

    fn check_batch(&self, batch: &[&Transition]) -> Result<Vec<Vec<f64>>> {
        if batch.is_empty() {
            return Err(Error::InsufficientData { have: 0, need: self.cfg.batch_size.max(1) });
        }
        let dim = self.env.obs_dim();
        batch
            .iter()
            .map(|t| {
                let f = t.obs.features();
                if f.len() != dim {
                    Err(Error::ShapeMismatch { expected: dim, got: f.len() })
                } else {
                    Ok(f)
                }
            })
            .collect()
    }

    pub fn update_ddpg(&mut self, batch: &[&Transition]) -> Result<LossReport> {
        let features = self.check_batch(batch)?;
        let ys = self.targets(batch, &features)?;
        let critic_loss = self.fit_critic(0, batch, &features, &ys)?;
        let actor_objective = self.fit_actor(&features)?;
        self.update_targets()?;
        Ok(LossReport { critic_loss, critic2_loss: None, actor_objective: Some(actor_objective) })
    }

    /// Critics every call; actor and targets only when `step_index` is a
    /// multiple of the policy delay.
    pub fn update_td3(&mut self, batch: &[&Transition], step_index: u64) -> Result<LossReport> {
        let features = self.check_batch(batch)?;
        let ys = self.targets(batch, &features)?;
        let critic_loss = self.fit_critic(0, batch, &features, &ys)?;
        let critic2_loss = if self.critics.len() > 1 { Some(self.fit_critic(1, batch, &features, &ys)?) } else { None };
        let actor_objective = if step_index.is_multiple_of(self.cfg.td3_policy_delay) {
            let obj = self.fit_actor(&features)?;
            self.update_targets()?;
            Some(obj)
        } else {
            None
        };
        Ok(LossReport { critic_loss, critic2_loss, actor_objective })
    }

    pub fn update(&mut self, batch: &[&Transition], step_index: u64) -> Result<LossReport> {
        match self.kind {
            AgentKind::Td3 => self.update_td3(batch, step_index),
            _ => self.update_ddpg(batch),
        }
    }

    /// Supervised warm start: regress the actor onto oracle pool fractions
    /// for contexts drawn from `indices`.
    fn pretrain(&mut self, series: &DemandSeries, indices: std::ops::Range<usize>, steps: usize) -> Result<()> {
        let batch = self.cfg.batch_size;
        for _ in 0..steps {
            let scale = 1.0 / batch as f64;
            let mut grads = vec![0.0; self.actor.num_params()];
            for _ in 0..batch {
                let t = self.rng.random_range(indices.clone());
                let obs = env::observe(series, t, &self.env)?;
                let target = solve_opt(series.demand(t), self.env.zeta, self.env.n_r, self.env.d_min).allocation;
                let cache = self.actor.forward_cached(&obs.features())?;
                let u = cache.output();
                let upstream = [
                    2.0 * (u[0] - target.n_a / self.env.n_r) * scale,
                    2.0 * (u[1] - target.n_b / self.env.n_r) * scale,
                ];
                self.actor.backward_into(&cache, &upstream, &mut grads)?;
            }
            self.actor_opt.step(self.actor.params_mut(), &grads)?;
        }
        self.actor_target = self.actor.clone();
        Ok(())
    }
}

/// Per-step rewards of a training run and their trailing moving average.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub rewards: Vec<f64>,
    pub moving_average: Vec<f64>,
}

/// A policy that can be evaluated on a series.
#[derive(Debug, Clone)]
pub enum TrainedPolicy {
    Learned(Box<Agent>),
    /// Per-step exact solution.
    Oracle,
    /// Static allocation solved against per-network maxima of the training split.
    Baseline { max_demand: (f64, f64) },
}

impl TrainedPolicy {
    pub fn kind(&self) -> AgentKind {
        match self {
            TrainedPolicy::Learned(a) => a.kind(),
            TrainedPolicy::Oracle => AgentKind::OptOracle,
            TrainedPolicy::Baseline { .. } => AgentKind::OptBase,
        }
    }

    pub fn agent(&self) -> Option<&Agent> {
        match self {
            TrainedPolicy::Learned(a) => Some(a),
            _ => None,
        }
    }
}

/// Training indices `[window_n, split)` and evaluation indices `[split, len)`.
pub fn split_ranges(series: &DemandSeries, cfg: &ExperimentConfig) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    let first = env::first_valid_index(&cfg.env);
    let split = series.split_index(cfg.eval_split).max(first);
    if split <= first || split >= series.len() {
        return Err(Error::config(format!(
            "series of {} samples is too short for window_n = {} and eval_split = {}",
            series.len(),
            cfg.env.window_n,
            cfg.eval_split
        )));
    }
    Ok((first..split, split..series.len()))
}

pub fn train(series: &DemandSeries, cfg: &ExperimentConfig) -> Result<(TrainedPolicy, LearningCurve)> {
    cfg.env.validate()?;
    let (train_idx, _) = split_ranges(series, cfg)?;
    match cfg.agent_kind {
        AgentKind::OptOracle => return Ok((TrainedPolicy::Oracle, LearningCurve::default())),
        AgentKind::OptBase => {
            let pairs: Vec<_> = train_idx.clone().map(|t| series.demand(t)).collect();
            let max_demand = max_demands(&pairs);
            return Ok((TrainedPolicy::Baseline { max_demand }, LearningCurve::default()));
        }
        AgentKind::Ddpg | AgentKind::Td3 => {}
    }

    let mut agent = Agent::new(cfg.agent_kind, cfg.env, cfg.agent.clone(), cfg.seed)?;
    if cfg.agent.pretrain_steps > 0 {
        agent.pretrain(series, train_idx.clone(), cfg.agent.pretrain_steps)?;
    }
    let mut buffer = ReplayBuffer::new(cfg.agent.buffer_capacity);
    let mut rewards = Vec::with_capacity(cfg.train_steps);
    let mut updates = 0u64;
    for step in 0..cfg.train_steps {
        let t = agent.rng.random_range(train_idx.clone());
        let obs = env::observe(series, t, &cfg.env)?;
        let raw = agent.act(&obs, true)?;
        let result = env::step(series, t, raw, &cfg.env)?;
        rewards.push(result.reward);
        buffer.push(Transition { obs, raw_action: raw, reward: result.reward });

        if step >= cfg.agent.warmup_steps && buffer.len() >= cfg.agent.batch_size {
            let mut rng = agent.rng.clone();
            let batch = buffer.sample(cfg.agent.batch_size, &mut rng);
            agent.rng = rng;
            updates += 1;
            agent.update(&batch, updates)?;
        }
        agent.decay_sigma();
    }
    let moving = if rewards.is_empty() { Vec::new() } else { moving_average(&rewards, CURVE_WINDOW)? };
    Ok((TrainedPolicy::Learned(Box::new(agent)), LearningCurve { rewards, moving_average: moving }))
}

/// Allocation chosen by `policy` for the context at index `t`.
pub fn allocate(policy: &TrainedPolicy, series: &DemandSeries, t: usize, env_cfg: &EnvConfig) -> Result<Allocation> {
    Ok(match policy {
        TrainedPolicy::Learned(agent) => {
            let obs = env::observe(series, t, env_cfg)?;
            env::project_action(agent.policy(&obs)?, env_cfg.n_r)
        }
        TrainedPolicy::Oracle => solve_opt(series.demand(t), env_cfg.zeta, env_cfg.n_r, env_cfg.d_min).allocation,
        TrainedPolicy::Baseline { max_demand } => {
            solve_opt_base(*max_demand, env_cfg.zeta, env_cfg.n_r, env_cfg.d_min).allocation
        }
    })
}

/// Greedy allocations for every index of the evaluation split.
pub fn greedy_policy(policy: &TrainedPolicy, series: &DemandSeries, cfg: &ExperimentConfig) -> Result<Vec<Allocation>> {
    let (_, eval_idx) = split_ranges(series, cfg)?;
    eval_idx.map(|t| allocate(policy, series, t, &cfg.env)).collect()
}
