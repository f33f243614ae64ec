//! Reward-decomposed double DQN.
//!
//! Each reward channel owns a [`SubAgent`] with an online and a target
//! Q-network. The [`AggregatedAgent`] acts greedily on the unweighted sum of
//! the sub-agents' Q-values; channel weights live in the environment's reward
//! vector, so per-channel Q-values are directly comparable.
//!
//! Bootstrapping follows the decomposed double-DQN rule: the successor action
//! `a*` is the argmax of the summed *online* Q-values, and each channel's
//! target network supplies the value of `a*` for its own target.

mod checkpoint;
mod replay;

use std::borrow::Borrow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::nn::{Mlp, Optimizer, OptimizerKind};
use crate::{argmax, Error, Result};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use replay::{ReplayMemory, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Agent steps between target-network syncs.
    pub target_sync_interval: u64,
    pub hidden_layers: Vec<usize>,
    /// Rescale each channel's gradient to at most this L2 norm.
    pub max_grad_norm: Option<f64>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            discount: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Sgd,
            batch_size: 32,
            replay_capacity: 50_000,
            target_sync_interval: 500,
            hidden_layers: vec![64, 64],
            max_grad_norm: None,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.discount) {
            return fail("discount must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end)
        {
            return fail("epsilon bounds must lie in [0, 1]");
        }
        if self.epsilon_end > self.epsilon_start {
            return fail("epsilon_end must not exceed epsilon_start");
        }
        if self.epsilon_decay_steps == 0 {
            return fail("epsilon_decay_steps must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return fail("batch_size and replay_capacity must be positive");
        }
        if self.batch_size > self.replay_capacity {
            return fail("batch_size must not exceed replay_capacity");
        }
        if self.target_sync_interval == 0 {
            return fail("target_sync_interval must be positive");
        }
        if self.hidden_layers.contains(&0) {
            return fail("hidden layer widths must be positive");
        }
        if matches!(self.max_grad_norm, Some(n) if !(n > 0.0)) {
            return fail("max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end`, flat afterwards.
pub fn epsilon_schedule(hyper: &Hyperparameters, step: u64) -> f64 {
    if step >= hyper.epsilon_decay_steps {
        return hyper.epsilon_end;
    }
    let frac = step as f64 / hyper.epsilon_decay_steps as f64;
    hyper.epsilon_start + (hyper.epsilon_end - hyper.epsilon_start) * frac
}

/// Per-channel Q-values, `channels x actions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct QMatrix {
    rows: Vec<Vec<f64>>,
}

impl QMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width == 0 {
            return Err(Error::Config("Q matrix needs at least one channel and action".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension {
                what: "Q matrix row",
                expected: width,
                actual: bad.len(),
            });
        }
        Ok(QMatrix { rows })
    }

    pub fn channels(&self) -> usize {
        self.rows.len()
    }

    pub fn actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.rows[channel]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, channel: usize, action: usize) -> f64 {
        self.rows[channel][action]
    }

    /// Aggregated Q-value per action.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.actions()];
        for row in &self.rows {
            for (s, q) in sums.iter_mut().zip(row) {
                *s += q;
            }
        }
        sums
    }

    pub fn greedy_action(&self) -> usize {
        argmax(&self.column_sums())
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|q| q.is_finite())
    }
}

impl TryFrom<Vec<Vec<f64>>> for QMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        QMatrix::new(rows)
    }
}

impl From<QMatrix> for Vec<Vec<f64>> {
    fn from(q: QMatrix) -> Self {
        q.rows
    }
}

/// Anything that can report per-channel action values for a state.
pub trait ActionValues {
    fn state_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn n_channels(&self) -> usize;
    fn q_matrix(&self, state: &[f64]) -> Result<QMatrix>;
}

/// A Q-network: state in, one value per action out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QFunction {
    net: Mlp,
}

impl QFunction {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        hidden: &[usize],
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![state_dim];
        dims.extend_from_slice(hidden);
        dims.push(n_actions);
        Ok(QFunction {
            net: Mlp::new(&dims, rng)?,
        })
    }

    pub fn from_network(net: Mlp) -> Self {
        QFunction { net }
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        self.net.forward(state)
    }
}

#[derive(Debug, Clone)]
pub struct SubAgent {
    channel: String,
    online: QFunction,
    target: QFunction,
    optimizer: Optimizer,
}

impl SubAgent {
    pub fn channel(&self) -> &str {
        &self.channel
    }

    pub fn online(&self) -> &QFunction {
        &self.online
    }

    pub fn target(&self) -> &QFunction {
        &self.target
    }

    pub fn online_mut(&mut self) -> &mut QFunction {
        &mut self.online
    }
}

/// Outcome of epsilon-greedy selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub action: usize,
    /// True when the action came from the random branch.
    pub exploratory: bool,
}

#[derive(Debug, Clone)]
pub struct AggregatedAgent {
    sub_agents: Vec<SubAgent>,
    hyper: Hyperparameters,
    state_dim: usize,
    n_actions: usize,
    step_counter: u64,
    epsilon_current: f64,
    execution: Execution,
}

impl AggregatedAgent {
    /// Fresh agent with seeded weight initialisation; target networks start
    /// as copies of the online networks.
    pub fn new<S: AsRef<str>>(
        state_dim: usize,
        n_actions: usize,
        channels: &[S],
        hyper: Hyperparameters,
        seed: u64,
    ) -> Result<Self> {
        hyper.validate()?;
        if channels.is_empty() {
            return Err(Error::Config("agent needs at least one reward channel".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = channels
            .iter()
            .map(|c| {
                let online = QFunction::new(state_dim, &hyper.hidden_layers, n_actions, &mut rng)?;
                Ok((c.as_ref().to_string(), online.net.clone(), online.net))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_networks(nets, hyper)
    }

    /// Assembles an agent from explicit `(channel, online, target)` networks.
    pub fn from_networks(nets: Vec<(String, Mlp, Mlp)>, hyper: Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        let Some((_, first, _)) = nets.first() else {
            return Err(Error::Config("agent needs at least one reward channel".into()));
        };
        let arch = first.dims();
        for (name, online, target) in &nets {
            if online.dims() != arch || target.dims() != arch {
                return Err(Error::Config(format!(
                    "sub-agent {name} architecture differs from {arch:?}"
                )));
            }
        }
        let state_dim = arch[0];
        let n_actions = *arch.last().unwrap();
        let sub_agents = nets
            .into_iter()
            .map(|(channel, online, target)| SubAgent {
                channel,
                optimizer: Optimizer::new(
                    hyper.optimizer,
                    hyper.learning_rate,
                    online.num_parameters(),
                ),
                online: QFunction::from_network(online),
                target: QFunction::from_network(target),
            })
            .collect();
        Ok(AggregatedAgent {
            sub_agents,
            epsilon_current: hyper.epsilon_start,
            hyper,
            state_dim,
            n_actions,
            step_counter: 0,
            execution: Execution::default(),
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn set_execution(&mut self, execution: Execution) {
        self.execution = execution;
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn sub_agents(&self) -> &[SubAgent] {
        &self.sub_agents
    }

    pub fn sub_agents_mut(&mut self) -> &mut [SubAgent] {
        &mut self.sub_agents
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.sub_agents.iter().map(|s| s.channel.clone()).collect()
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon_current
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim,
                actual: state.len(),
            });
        }
        Ok(())
    }

    /// Online-network Q-values, one row per channel.
    pub fn predict_q(&self, state: &[f64]) -> Result<QMatrix> {
        self.check_state(state)?;
        let rows = self
            .sub_agents
            .iter()
            .map(|s| s.online.q_values(state))
            .collect();
        QMatrix::new(rows)
    }

    pub fn greedy_action(&self, state: &[f64]) -> Result<usize> {
        Ok(self.predict_q(state)?.greedy_action())
    }

    /// Epsilon-greedy over the aggregated Q-values.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Selection> {
        let q = self.predict_q(state)?;
        Ok(select_from(&q, epsilon, rng))
    }

    /// Bootstrapping targets, `batch x channels`.
    pub fn compute_targets<T: Borrow<Transition> + Sync>(
        &self,
        batch: &[T],
    ) -> Result<Vec<Vec<f64>>> {
        self.bootstrap_targets(batch, self.hyper.discount)
    }

    /// [`compute_targets`](Self::compute_targets) with an explicit discount,
    /// which may be 1 for undiscounted evaluation.
    pub fn bootstrap_targets<T: Borrow<Transition> + Sync>(
        &self,
        batch: &[T],
        gamma: f64,
    ) -> Result<Vec<Vec<f64>>> {
        for t in batch {
            self.check_transition(t.borrow())?;
        }
        Ok(self.execution.map(batch, |t| {
            let t = t.borrow();
            if t.terminal {
                return t.reward.clone();
            }
            let mut sums = vec![0.0; self.n_actions];
            for s in &self.sub_agents {
                for (acc, q) in sums.iter_mut().zip(s.online.q_values(&t.next_state)) {
                    *acc += q;
                }
            }
            let best = argmax(&sums);
            self.sub_agents
                .iter()
                .zip(&t.reward)
                .map(|(s, r)| r + gamma * s.target.q_values(&t.next_state)[best])
                .collect()
        }))
    }

    fn check_transition(&self, t: &Transition) -> Result<()> {
        self.check_state(&t.state)?;
        self.check_state(&t.next_state)?;
        if t.reward.len() != self.sub_agents.len() {
            return Err(Error::Dimension {
                what: "transition reward vector",
                expected: self.sub_agents.len(),
                actual: t.reward.len(),
            });
        }
        if t.action >= self.n_actions {
            return Err(Error::OutOfRange {
                what: "action",
                index: t.action,
                len: self.n_actions,
            });
        }
        Ok(())
    }

    /// One gradient step per online network on the mean squared TD error.
    /// Returns each channel's loss measured before the step.
    pub fn train_step<T: Borrow<Transition> + Sync>(&mut self, batch: &[T]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::Config("empty training batch".into()));
        }
        let targets = self.compute_targets(batch)?;
        let n = batch.len() as f64;
        let n_actions = self.n_actions;
        let clip = self.hyper.max_grad_norm;
        let indexed: Vec<(usize, &mut SubAgent)> = self.sub_agents.iter_mut().enumerate().collect();
        let mut work = indexed;
        let results = self.execution.map_mut(&mut work, |(c, sub)| {
            let net = sub.online.network();
            let mut grads = net.zero_gradients();
            let mut loss = 0.0;
            let mut d_out = vec![0.0; n_actions];
            for (t, y) in batch.iter().zip(&targets) {
                let t = t.borrow();
                let acts = net.forward_cached(&t.state);
                let diff = acts.output()[t.action] - y[*c];
                loss += diff * diff / n;
                d_out.fill(0.0);
                d_out[t.action] = 2.0 * diff / n;
                net.backward(&acts, &d_out, &mut grads);
            }
            if !loss.is_finite() {
                return Err(*c);
            }
            if let Some(max) = clip {
                let norm = grads.norm();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            sub.optimizer.step(&mut sub.online.net, &grads);
            Ok(loss)
        });
        results
            .into_iter()
            .map(|r| {
                r.map_err(|channel| Error::Divergence {
                    step: self.step_counter,
                    channel,
                })
            })
            .collect()
    }

    pub fn sync_target_networks(&mut self) {
        for s in &mut self.sub_agents {
            s.target = s.online.clone();
        }
    }

    /// Sets the current epsilon from the schedule at the current step count.
    pub fn decay_epsilon(&mut self) -> f64 {
        self.epsilon_current = epsilon_schedule(&self.hyper, self.step_counter);
        self.epsilon_current
    }

    /// Sample, train, advance the step counter, sync targets on schedule and
    /// decay epsilon. Returns `None` for the loss while replay is not ready.
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        memory: &ReplayMemory,
        rng: &mut R,
    ) -> Result<Option<Vec<f64>>> {
        let losses = match memory.sample(self.hyper.batch_size, rng) {
            Some(batch) => Some(self.train_step(&batch)?),
            None => None,
        };
        self.step_counter += 1;
        if self.step_counter % self.hyper.target_sync_interval == 0 {
            self.sync_target_networks();
        }
        self.decay_epsilon();
        Ok(losses)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_agent(self)
    }

    pub fn from_checkpoint(cp: Checkpoint) -> Result<Self> {
        cp.into_agent()
    }

    pub(crate) fn set_progress(&mut self, step_counter: u64, epsilon: f64) {
        self.step_counter = step_counter;
        self.epsilon_current = epsilon;
    }
}

impl ActionValues for AggregatedAgent {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn n_channels(&self) -> usize {
        self.sub_agents.len()
    }

    fn q_matrix(&self, state: &[f64]) -> Result<QMatrix> {
        self.predict_q(state)
    }
}

/// Epsilon-greedy choice on a precomputed Q matrix.
pub fn select_from<R: Rng + ?Sized>(q: &QMatrix, epsilon: f64, rng: &mut R) -> Selection {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        Selection {
            action: rng.random_range(0..q.actions()),
            exploratory: true,
        }
    } else {
        Selection {
            action: q.greedy_action(),
            exploratory: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;

    /// Network whose output is `bias` regardless of input.
    fn constant_net(state_dim: usize, bias: Vec<f64>) -> Mlp {
        let mut out = Dense::zeros(4, bias.len());
        out.bias = bias;
        Mlp::from_layers(vec![Dense::zeros(state_dim, 4), out]).unwrap()
    }

    fn hyper() -> Hyperparameters {
        Hyperparameters {
            hidden_layers: vec![8],
            batch_size: 4,
            replay_capacity: 64,
            ..Default::default()
        }
    }

    #[test]
    fn zero_weights_give_zero_q() {
        let z = Mlp::zeros(&[3, 5, 2]).unwrap();
        let agent = AggregatedAgent::from_networks(
            vec![("a".into(), z.clone(), z.clone()), ("b".into(), z.clone(), z)],
            hyper(),
        )
        .unwrap();
        let q = agent.predict_q(&[0.3, -2.0, 7.0]).unwrap();
        assert_eq!(q.rows(), &[vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn hand_set_forward_through_agent() {
        // 1-d state, one hidden unit with weight 1 (identity for x >= 0),
        // output [2h + 1, -h]
        let net = Mlp::from_layers(vec![
            Dense {
                in_dim: 1,
                out_dim: 1,
                weights: vec![1.0],
                bias: vec![0.0],
            },
            Dense {
                in_dim: 1,
                out_dim: 2,
                weights: vec![2.0, -1.0],
                bias: vec![1.0, 0.0],
            },
        ])
        .unwrap();
        let agent =
            AggregatedAgent::from_networks(vec![("c".into(), net.clone(), net)], hyper()).unwrap();
        assert_eq!(agent.predict_q(&[3.0]).unwrap().rows(), &[vec![7.0, -3.0]]);
        assert_eq!(agent.predict_q(&[-3.0]).unwrap().rows(), &[vec![1.0, 0.0]]);
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let agent = AggregatedAgent::new(3, 2, &["a"], hyper(), 1).unwrap();
        assert!(matches!(
            agent.predict_q(&[1.0]),
            Err(Error::Dimension { expected: 3, actual: 1, .. })
        ));
    }

    #[test]
    fn predict_is_deterministic() {
        let agent = AggregatedAgent::new(3, 4, &["a", "b"], hyper(), 7).unwrap();
        let s = [0.1, 0.5, 0.9];
        assert_eq!(agent.predict_q(&s).unwrap(), agent.predict_q(&s).unwrap());
    }

    #[test]
    fn greedy_uses_summed_channels() {
        let agent = AggregatedAgent::from_networks(
            vec![
                ("a".into(), constant_net(1, vec![1.0, 0.0]), constant_net(1, vec![0.0, 0.0])),
                ("b".into(), constant_net(1, vec![0.0, 0.5]), constant_net(1, vec![0.0, 0.0])),
            ],
            hyper(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sel = agent.select_action(&[0.0], 0.0, &mut rng).unwrap();
        assert_eq!(sel, Selection { action: 0, exploratory: false });
    }

    #[test]
    fn greedy_ties_pick_lowest_index() {
        let z = Mlp::zeros(&[2, 3, 4]).unwrap();
        let agent =
            AggregatedAgent::from_networks(vec![("a".into(), z.clone(), z)], hyper()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(agent.select_action(&[1.0, 1.0], 0.0, &mut rng).unwrap().action, 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let agent = AggregatedAgent::new(2, 5, &["a"], hyper(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            let sel = agent.select_action(&[0.2, 0.4], 1.0, &mut rng).unwrap();
            assert!(sel.exploratory);
            counts[sel.action] += 1;
        }
        let p = 0.2;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let agent = AggregatedAgent::new(2, 3, &["a", "b", "c"], hyper(), 5).unwrap();
        let t = Transition {
            state: vec![0.0, 1.0],
            action: 1,
            reward: vec![1.0, -1.0, 0.0],
            next_state: vec![1.0, 0.0],
            terminal: true,
        };
        assert_eq!(agent.compute_targets(&[t]).unwrap(), vec![vec![1.0, -1.0, 0.0]]);
    }

    #[test]
    fn zero_discount_targets_are_rewards() {
        let h = Hyperparameters {
            discount: 0.0,
            ..hyper()
        };
        let agent = AggregatedAgent::new(2, 3, &["a", "b"], h, 5).unwrap();
        let t = Transition {
            state: vec![0.0, 1.0],
            action: 2,
            reward: vec![0.25, -4.0],
            next_state: vec![0.3, 0.9],
            terminal: false,
        };
        assert_eq!(agent.compute_targets(&[t]).unwrap(), vec![vec![0.25, -4.0]]);
    }

    #[test]
    fn decoupled_double_dqn_target() {
        let h = Hyperparameters {
            discount: 0.5,
            ..hyper()
        };
        let agent = AggregatedAgent::from_networks(
            vec![
                ("a".into(), constant_net(1, vec![2.0, 1.0]), constant_net(1, vec![5.0, 6.0])),
                ("b".into(), constant_net(1, vec![0.0, 3.0]), constant_net(1, vec![7.0, 8.0])),
            ],
            h,
        )
        .unwrap();
        let t = Transition {
            state: vec![0.0],
            action: 0,
            reward: vec![0.5, -0.5],
            next_state: vec![1.0],
            terminal: false,
        };
        // online sums [2, 4] -> a* = 1; targets 0.5 + 0.5*6, -0.5 + 0.5*8
        assert_eq!(agent.compute_targets(&[&t]).unwrap(), vec![vec![3.5, 3.5]]);
        assert_eq!(agent.bootstrap_targets(&[&t], 1.0).unwrap(), vec![vec![6.5, 7.5]]);
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let h = Hyperparameters {
            epsilon_start: 1.0,
            epsilon_end: 0.0,
            epsilon_decay_steps: 100,
            ..hyper()
        };
        assert_eq!(epsilon_schedule(&h, 0), 1.0);
        assert_eq!(epsilon_schedule(&h, 50), 0.5);
        assert_eq!(epsilon_schedule(&h, 100), 0.0);
        assert_eq!(epsilon_schedule(&h, 10_000), 0.0);
    }

    #[test]
    fn hyperparameter_validation() {
        let bad = [
            Hyperparameters { discount: 1.0, ..hyper() },
            Hyperparameters { epsilon_end: 0.9, epsilon_start: 0.5, ..hyper() },
            Hyperparameters { batch_size: 100, replay_capacity: 10, ..hyper() },
            Hyperparameters { learning_rate: 0.0, ..hyper() },
            Hyperparameters { hidden_layers: vec![0], ..hyper() },
        ];
        for h in bad {
            assert!(h.validate().is_err(), "{h:?}");
        }
        assert!(Hyperparameters::default().validate().is_ok());
    }

    #[test]
    fn training_without_sync_leaves_targets_behind() {
        let mut agent = AggregatedAgent::new(2, 2, &["a"], hyper(), 1).unwrap();
        let t = Transition {
            state: vec![0.5, 0.5],
            action: 0,
            reward: vec![10.0],
            next_state: vec![0.5, 0.5],
            terminal: true,
        };
        agent.train_step(&[t]).unwrap();
        let probe = [0.5, 0.5];
        let s = &agent.sub_agents()[0];
        assert_ne!(s.online().q_values(&probe), s.target().q_values(&probe));
        agent.sync_target_networks();
        let s = &agent.sub_agents()[0];
        assert_eq!(s.online().q_values(&probe), s.target().q_values(&probe));
        let snapshot = agent.sub_agents()[0].target().clone();
        agent.sync_target_networks();
        assert_eq!(agent.sub_agents()[0].target(), &snapshot);
    }
}
