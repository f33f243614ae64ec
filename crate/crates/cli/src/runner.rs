//! The monitor / decide / execute loop with the RL agent in place of the
//! analyze and plan activities, recording one trace record per decision.

use std::sync::Arc;

use dinekit_core::agent::{select_from, AggregatedAgent, ReplayMemory, Transition};
use dinekit_core::dine::{
    detect_dines, probe_extrema, train_env_model, EnvironmentModel, ForwardModel, Thresholds,
    TrainReport,
};
use dinekit_core::env::{CliffWalk, EnvConfig, Environment, SwimEnv};
use dinekit_core::trace::{Trace, TraceMeta, TraceRecord};
use parking_lot::{Mutex, RwLock};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, EnvironmentKind, RunConfig};

/// State shared between the training loop and the HTTP service.
///
/// The loop takes the write lock once per step to append; readers take the
/// read lock and see whole records only. Threshold changes land in `control`
/// and are picked up at the next step boundary.
#[derive(Debug)]
pub struct Shared {
    pub trace: RwLock<Trace>,
    control: Mutex<Thresholds>,
}

impl Shared {
    pub fn new(trace: Trace) -> Arc<Self> {
        let thresholds = trace.meta().thresholds;
        Arc::new(Shared {
            trace: RwLock::new(trace),
            control: Mutex::new(thresholds),
        })
    }

    pub fn thresholds(&self) -> Thresholds {
        *self.control.lock()
    }

    /// Installs new live thresholds and returns the previous ones.
    pub fn set_thresholds(&self, t: Thresholds) -> dinekit_core::Result<Thresholds> {
        t.validate()?;
        let mut control = self.control.lock();
        self.trace.write().set_thresholds(t)?;
        Ok(std::mem::replace(&mut *control, t))
    }
}

pub fn config_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub timestep: u64,
    pub action: usize,
    pub reward: Vec<f64>,
    pub terminal: bool,
    pub losses: Option<Vec<f64>>,
}

pub struct Runner<E> {
    env: E,
    agent: AggregatedAgent,
    memory: ReplayMemory,
    model: Option<EnvironmentModel>,
    rng: ChaCha8Rng,
    model_rng: ChaCha8Rng,
    shared: Arc<Shared>,
    train_every: u64,
    t: u64,
    episode_return: f64,
    episode_returns: Vec<f64>,
    model_reports: Vec<(u64, TrainReport)>,
}

impl<E: Environment> Runner<E> {
    pub fn new(mut env: E, cfg: &RunConfig, config_digest: String) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let cerr = |e: dinekit_core::Error| ConfigError(e.to_string());
        env.reset();
        let channels = env.channel_names();
        let agent = AggregatedAgent::new(
            env.observation_dim(),
            env.n_actions(),
            &channels,
            cfg.hyper.clone(),
            cfg.seed,
        )
        .map_err(cerr)?
        .with_execution(cfg.execution);
        let memory = ReplayMemory::new(cfg.hyper.replay_capacity, channels.len()).map_err(cerr)?;
        let model = if cfg.extrema {
            Some(
                EnvironmentModel::new(env.observation_dim(), env.n_actions(), cfg.env_model.clone())
                    .map_err(cerr)?,
            )
        } else {
            None
        };
        let meta = TraceMeta {
            channel_names: channels,
            action_names: env.action_names(),
            state_names: env.state_names(),
            channel_weights: env.channel_weights(),
            thresholds: cfg.thresholds,
            config_digest,
        };
        let trace = Trace::new(meta).map_err(cerr)?;
        let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_d1e5);
        Ok(Runner {
            env,
            agent,
            memory,
            model,
            rng: ChaCha8Rng::seed_from_u64(seeder.next_u64()),
            model_rng: ChaCha8Rng::seed_from_u64(seeder.next_u64()),
            shared: Shared::new(trace),
            train_every: cfg.train_every,
            t: 0,
            episode_return: 0.0,
            episode_returns: Vec::new(),
            model_reports: Vec::new(),
        })
    }

    pub fn shared(&self) -> Arc<Shared> {
        Arc::clone(&self.shared)
    }

    pub fn agent(&self) -> &AggregatedAgent {
        &self.agent
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn model(&self) -> Option<&EnvironmentModel> {
        self.model.as_ref()
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// Sum of the reward vector per finished episode.
    pub fn episode_returns(&self) -> &[f64] {
        &self.episode_returns
    }

    pub fn model_reports(&self) -> &[(u64, TrainReport)] {
        &self.model_reports
    }

    /// One decision: observe, select, probe, execute, store, learn, detect,
    /// record.
    pub fn step(&mut self) -> dinekit_core::Result<StepInfo> {
        let thresholds = self.shared.thresholds();
        let t = self.t;
        let observation = self.env.observation();
        let raw_state = self.env.raw_state();

        let q = self.agent.predict_q(&observation)?;
        let epsilon = self.agent.epsilon();
        let selection = select_from(&q, epsilon, &mut self.rng);
        let probe = match &self.model {
            Some(m) if m.is_ready() => probe_extrema(&self.agent, m, &observation)?,
            _ => None,
        };

        let outcome = self.env.step(selection.action)?;
        self.episode_return += outcome.reward.iter().sum::<f64>();
        let bootstrap_cut = outcome.terminal && !self.env.is_truncated();
        self.memory.store(Transition {
            state: observation,
            action: selection.action,
            reward: outcome.reward.clone(),
            next_state: outcome.observation,
            terminal: bootstrap_cut,
        })?;

        let losses = if (t + 1) % self.train_every == 0 {
            self.agent.learn(&self.memory, &mut self.rng)?
        } else {
            None
        };
        self.maybe_retrain_model(t)?;

        let dines = detect_dines(&q, selection.action, probe.as_ref(), thresholds, t);
        let record = TraceRecord {
            timestep: t,
            raw_state,
            action: selection.action,
            reward: outcome.reward.clone(),
            q_values: q,
            epsilon,
            exploratory: selection.exploratory,
            thresholds,
            dines,
            extremum_probe: probe,
        };
        self.shared.trace.write().append(record)?;

        if outcome.terminal {
            self.episode_returns.push(std::mem::take(&mut self.episode_return));
            self.env.reset();
        }
        self.t += 1;
        Ok(StepInfo {
            timestep: t,
            action: selection.action,
            reward: outcome.reward,
            terminal: outcome.terminal,
            losses,
        })
    }

    fn maybe_retrain_model(&mut self, t: u64) -> dinekit_core::Result<()> {
        let Some(model) = &mut self.model else {
            return Ok(());
        };
        let cfg = model.config();
        let due = self.memory.len() >= cfg.min_samples
            && (!model.is_ready() || (t + 1) % cfg.retrain_interval == 0);
        if due {
            let (epochs, holdout) = (cfg.epochs, cfg.holdout_fraction);
            let report = train_env_model(model, &self.memory, epochs, holdout, &mut self.model_rng)?;
            log::debug!("env model retrained at t={t}: held-out mse {:?}", report.heldout_mse);
            self.model_reports.push((t, report));
        }
        Ok(())
    }

    pub fn run(&mut self, steps: u64) -> dinekit_core::Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Return of one greedy episode from a fresh reset, capped at
    /// `max_steps`. Leaves the environment reset for training to continue.
    pub fn greedy_return(&mut self, max_steps: usize) -> dinekit_core::Result<f64> {
        let mut obs = self.env.reset();
        let mut total = 0.0;
        for _ in 0..max_steps {
            let a = self.agent.greedy_action(&obs)?;
            let out = self.env.step(a)?;
            total += out.reward.iter().sum::<f64>();
            obs = out.observation;
            if out.terminal {
                break;
            }
        }
        self.env.reset();
        self.episode_return = 0.0;
        Ok(total)
    }
}

/// Either simulator behind one type, picked by the run configuration.
pub enum AnyEnv {
    Swim(SwimEnv),
    CliffWalk(CliffWalk),
}

macro_rules! delegate {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            AnyEnv::Swim($e) => $body,
            AnyEnv::CliffWalk($e) => $body,
        }
    };
}

impl Environment for AnyEnv {
    fn observation_dim(&self) -> usize {
        delegate!(self, e => e.observation_dim())
    }
    fn n_actions(&self) -> usize {
        delegate!(self, e => e.n_actions())
    }
    fn channel_names(&self) -> Vec<String> {
        delegate!(self, e => e.channel_names())
    }
    fn action_names(&self) -> Vec<String> {
        delegate!(self, e => e.action_names())
    }
    fn state_names(&self) -> Vec<String> {
        delegate!(self, e => e.state_names())
    }
    fn channel_weights(&self) -> Vec<f64> {
        delegate!(self, e => e.channel_weights())
    }
    fn observation(&self) -> Vec<f64> {
        delegate!(self, e => e.observation())
    }
    fn raw_state(&self) -> Vec<f64> {
        delegate!(self, e => e.raw_state())
    }
    fn reset(&mut self) -> Vec<f64> {
        delegate!(self, e => e.reset())
    }
    fn step(&mut self, action: usize) -> dinekit_core::Result<dinekit_core::env::StepOutcome> {
        delegate!(self, e => e.step(action))
    }
    fn is_truncated(&self) -> bool {
        delegate!(self, e => e.is_truncated())
    }
}

/// Builds the environment and runner described by `cfg`.
pub fn build(cfg: &RunConfig) -> Result<Runner<AnyEnv>, ConfigError> {
    cfg.validate()?;
    let (env, digest) = match cfg.environment {
        EnvironmentKind::Swim => {
            let env_cfg: EnvConfig = cfg.env_config()?;
            let digest = config_digest(&env_cfg.to_toml());
            let env = SwimEnv::new(env_cfg).map_err(|e| ConfigError(e.to_string()))?;
            (AnyEnv::Swim(env), digest)
        }
        EnvironmentKind::CliffWalk => (AnyEnv::CliffWalk(CliffWalk::default()), config_digest("cliff_walk 4x12")),
    };
    Runner::new(env, cfg, digest)
}
