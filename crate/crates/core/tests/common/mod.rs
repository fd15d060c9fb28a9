use adapshare::AgentConfig;

/// Settings for a pool twenty times larger than demand. The reward spans
/// hundreds of units away from the optimum, so the actor is first regressed
/// onto the oracle and the critic learns fast enough to keep up.
pub fn constant_demand_agent() -> AgentConfig {
    AgentConfig {
        pretrain_steps: 2_000,
        critic_lr: 1e-2,
        explore_sigma: 0.05,
        sigma_decay: 0.999,
        ..AgentConfig::default()
    }
}
