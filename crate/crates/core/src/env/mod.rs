//! Environments with a vector-valued reward.
//!
//! [`Environment`] is a gym-style `step` interface whose reward is one value
//! per reward channel instead of a scalar.

mod gridworld;
mod queue;
mod reward;
mod swim;
mod workload;

pub use gridworld::{CliffWalk, GRID_ACTIONS};
pub use queue::{erlang_c, simulate_interval, IntervalMetrics, QueueModel};
pub use reward::{
    compose_reward, reward_costs, reward_revenue, reward_user_satisfaction, ChannelValues,
    RewardParams,
};
pub use swim::{
    Action, EnvConfig, EnvState, ObservationBounds, ServerLimits, SwimEnv, SwimStep,
    CHANNEL_NAMES, STATE_NAMES,
};
pub use workload::{load_trace, Peak, Phase, WorkloadConfig, WorkloadGenerator, WorkloadPattern};

use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Agent-facing observation after the step.
    pub observation: Vec<f64>,
    /// One entry per reward channel.
    pub reward: Vec<f64>,
    pub terminal: bool,
}

pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn channel_names(&self) -> Vec<String>;
    fn action_names(&self) -> Vec<String>;
    /// Names of the entries of [`raw_state`](Self::raw_state).
    fn state_names(&self) -> Vec<String>;

    fn channel_weights(&self) -> Vec<f64> {
        vec![1.0; self.channel_names().len()]
    }

    fn observation(&self) -> Vec<f64>;
    /// Unscaled state variables, for display.
    fn raw_state(&self) -> Vec<f64>;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepOutcome>;

    /// True when the last terminal step was a time limit, not a real end.
    fn is_truncated(&self) -> bool {
        false
    }
}
