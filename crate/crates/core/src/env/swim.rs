//! Simulated multi-tier web application with server and dimmer controls.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::queue::{simulate_interval, QueueModel};
use super::reward::{
    compose_reward, reward_costs, reward_revenue, reward_user_satisfaction, ChannelValues,
    RewardParams,
};
use super::workload::{WorkloadConfig, WorkloadGenerator};
use super::{Environment, StepOutcome};
use crate::{Error, Result};

pub const CHANNEL_NAMES: [&str; 3] = ["User Satisfaction", "Revenue", "Running Costs"];
pub const STATE_NAMES: [&str; 6] = [
    "arrival_rate",
    "avg_latency",
    "throughput",
    "servers",
    "dimmer",
    "booting_servers",
];

/// Dimmer grid steps; the dimmer value is `level / DIMMER_LEVELS`.
const DIMMER_LEVELS: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    AddServer = 0,
    RemoveServer = 1,
    IncreaseDimmer = 2,
    DecreaseDimmer = 3,
    NoAdaptation = 4,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::AddServer,
        Action::RemoveServer,
        Action::IncreaseDimmer,
        Action::DecreaseDimmer,
        Action::NoAdaptation,
    ];

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::AddServer => "Add Server",
            Action::RemoveServer => "Remove Server",
            Action::IncreaseDimmer => "Increase Dimmer",
            Action::DecreaseDimmer => "Decrease Dimmer",
            Action::NoAdaptation => "No Adaptation",
        }
    }

    /// Everything except `NoAdaptation`, including attempts that hit a bound.
    pub fn is_state_changing(self) -> bool {
        self != Action::NoAdaptation
    }
}

/// Observable state after an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub arrival_rate: f64,
    pub avg_latency: f64,
    pub throughput: f64,
    pub servers: u32,
    pub dimmer: f64,
    pub booting: u32,
}

impl EnvState {
    pub fn as_vec(&self) -> Vec<f64> {
        vec![
            self.arrival_rate,
            self.avg_latency,
            self.throughput,
            f64::from(self.servers),
            self.dimmer,
            f64::from(self.booting),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerLimits {
    pub min: u32,
    pub max: u32,
    pub initial: u32,
    /// Initial dimmer, snapped to the 0.1 grid.
    pub initial_dimmer: f64,
}

impl Default for ServerLimits {
    fn default() -> Self {
        ServerLimits {
            min: 1,
            max: 12,
            initial: 4,
            initial_dimmer: 0.5,
        }
    }
}

/// Upper bounds for min-max scaling the observation into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationBounds {
    pub max_arrival_rate: f64,
    pub max_latency: f64,
    pub max_throughput: f64,
}

impl Default for ObservationBounds {
    fn default() -> Self {
        ObservationBounds {
            max_arrival_rate: 100.0,
            max_latency: 1.0,
            max_throughput: 100.0,
        }
    }
}

/// Complete simulator configuration, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub reward: RewardParams,
    pub queue: QueueModel,
    pub servers: ServerLimits,
    pub workload: WorkloadConfig,
    pub observation: ObservationBounds,
    /// Directory that relative trace-file paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl EnvConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("environment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("environment config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        self.queue.validate()?;
        let s = &self.servers;
        if s.min < 1 || s.min > s.max || !(s.min..=s.max).contains(&s.initial) {
            return Err(Error::Config(
                "servers need 1 <= min <= initial <= max".into(),
            ));
        }
        if !(0.0..=1.0).contains(&s.initial_dimmer) {
            return Err(Error::Config("servers.initial_dimmer must lie in [0, 1]".into()));
        }
        let o = &self.observation;
        if !(o.max_arrival_rate > 0.0 && o.max_latency > 0.0 && o.max_throughput > 0.0) {
            return Err(Error::Config("observation bounds must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one simulator interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SwimStep {
    pub state: EnvState,
    pub channels: ChannelValues,
    pub reward: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct SwimEnv {
    config: EnvConfig,
    workload: WorkloadGenerator,
    servers: u32,
    dimmer_level: u8,
    /// Remaining boot intervals per booting server.
    boot_queue: VecDeque<u32>,
    state: EnvState,
    steps: u64,
}

impl SwimEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let workload = WorkloadGenerator::new(&config.workload, config.base_dir.as_deref())?;
        let mut env = SwimEnv {
            servers: config.servers.initial,
            dimmer_level: snap_dimmer(config.servers.initial_dimmer),
            workload,
            config,
            boot_queue: VecDeque::new(),
            state: EnvState {
                arrival_rate: 0.0,
                avg_latency: 0.0,
                throughput: 0.0,
                servers: 0,
                dimmer: 0.0,
                booting: 0,
            },
            steps: 0,
        };
        env.reset_state();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Intervals simulated since the last reset.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn dimmer(&self) -> f64 {
        f64::from(self.dimmer_level) / f64::from(DIMMER_LEVELS)
    }

    fn reset_state(&mut self) {
        self.servers = self.config.servers.initial;
        self.dimmer_level = snap_dimmer(self.config.servers.initial_dimmer);
        self.boot_queue.clear();
        self.workload.reset();
        self.steps = 0;
        let rate = self.workload.next_rate();
        self.state = self.measure(rate);
    }

    fn measure(&self, arrival_rate: f64) -> EnvState {
        let m = simulate_interval(self.servers, self.dimmer(), arrival_rate, &self.config.queue);
        EnvState {
            arrival_rate,
            avg_latency: m.avg_latency,
            throughput: m.throughput,
            servers: self.servers,
            dimmer: self.dimmer(),
            booting: self.boot_queue.len() as u32,
        }
    }

    pub fn step_action(&mut self, action: Action) -> SwimStep {
        let limits = &self.config.servers;
        // servers that finish booting become active at the start of the interval
        for timer in self.boot_queue.iter_mut() {
            *timer -= 1;
        }
        while self.boot_queue.front() == Some(&0) {
            self.boot_queue.pop_front();
            self.servers = (self.servers + 1).min(limits.max);
        }
        match action {
            Action::AddServer => {
                if self.servers + (self.boot_queue.len() as u32) < limits.max {
                    if self.config.queue.boot_delay == 0 {
                        self.servers += 1;
                    } else {
                        self.boot_queue.push_back(self.config.queue.boot_delay);
                    }
                }
            }
            Action::RemoveServer => {
                if self.servers > limits.min {
                    self.servers -= 1;
                }
            }
            Action::IncreaseDimmer => self.dimmer_level = (self.dimmer_level + 1).min(DIMMER_LEVELS),
            Action::DecreaseDimmer => self.dimmer_level = self.dimmer_level.saturating_sub(1),
            Action::NoAdaptation => {}
        }
        let rate = self.workload.next_rate();
        self.state = self.measure(rate);
        self.steps += 1;

        let p = &self.config.reward;
        let channels = ChannelValues {
            user_satisfaction: reward_user_satisfaction(self.state.avg_latency),
            revenue: reward_revenue(
                p.tau,
                rate,
                self.state.dimmer,
                p.optional_revenue,
                p.mandatory_revenue,
            ),
            costs: reward_costs(p.tau, p.server_cost, self.servers),
        };
        SwimStep {
            state: self.state.clone(),
            reward: compose_reward(channels, action, p),
            channels,
        }
    }

    /// Min-max scaled `(arrival, latency, throughput, servers, dimmer,
    /// booting)`. Booting servers are visible so the agent can tell a pending
    /// addition from a missing one.
    pub fn scaled_observation(&self) -> Vec<f64> {
        let b = &self.config.observation;
        let l = &self.config.servers;
        let span = f64::from(l.max - l.min);
        let servers = if span > 0.0 {
            f64::from(self.state.servers - l.min) / span
        } else {
            0.0
        };
        vec![
            (self.state.arrival_rate / b.max_arrival_rate).clamp(0.0, 1.0),
            (self.state.avg_latency / b.max_latency).clamp(0.0, 1.0),
            (self.state.throughput / b.max_throughput).clamp(0.0, 1.0),
            servers,
            self.state.dimmer,
            if span > 0.0 {
                f64::from(self.state.booting) / span
            } else {
                0.0
            },
        ]
    }
}

fn snap_dimmer(d: f64) -> u8 {
    (d * f64::from(DIMMER_LEVELS)).round().clamp(0.0, f64::from(DIMMER_LEVELS)) as u8
}

impl Environment for SwimEnv {
    fn observation_dim(&self) -> usize {
        STATE_NAMES.len()
    }

    fn n_actions(&self) -> usize {
        Action::ALL.len()
    }

    fn channel_names(&self) -> Vec<String> {
        CHANNEL_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn action_names(&self) -> Vec<String> {
        Action::ALL.iter().map(|a| a.name().to_string()).collect()
    }

    fn state_names(&self) -> Vec<String> {
        STATE_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn channel_weights(&self) -> Vec<f64> {
        self.config.reward.weights.to_vec()
    }

    fn observation(&self) -> Vec<f64> {
        self.scaled_observation()
    }

    fn raw_state(&self) -> Vec<f64> {
        self.state.as_vec()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.reset_state();
        self.scaled_observation()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let a = Action::from_index(action).ok_or(Error::OutOfRange {
            what: "action",
            index: action,
            len: Action::ALL.len(),
        })?;
        let out = self.step_action(a);
        Ok(StepOutcome {
            observation: self.scaled_observation(),
            reward: out.reward.to_vec(),
            terminal: false,
        })
    }
}
