//! Learned forward model `(s, a) -> s'` trained on the replay memory.
//!
//! The network sees the standardized state concatenated with a one-hot
//! action and regresses the standardized state change `s' - s`. The model is
//! retrained from scratch each time, so its output never depends on how many
//! times it was trained before.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::extremum::ForwardModel;
use crate::agent::ReplayMemory;
use crate::nn::{Mlp, Optimizer, OptimizerKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvModelConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Replay entries needed before the model may be trained.
    pub min_samples: usize,
    /// Only the most recent transitions are used when set.
    pub max_samples: Option<usize>,
    pub holdout_fraction: f64,
    /// Agent steps between retrains.
    pub retrain_interval: u64,
}

impl Default for EnvModelConfig {
    fn default() -> Self {
        EnvModelConfig {
            hidden: 64,
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 64,
            min_samples: 1_000,
            max_samples: Some(10_000),
            holdout_fraction: 0.1,
            retrain_interval: 1_000,
        }
    }
}

impl EnvModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 || self.retrain_interval == 0 {
            return Err(Error::Config(
                "env model hidden, batch_size and retrain_interval must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config("env model holdout_fraction must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("env model learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_samples: usize,
    pub heldout_samples: usize,
    /// Held-out mean squared error per state dimension, observation units.
    pub heldout_mse: Vec<f64>,
    /// Same, after dividing each dimension by its training-set spread of `s'`.
    pub heldout_mse_standardized: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct Scaler {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Scaler {
    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0.0;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            n += 1.0;
            for i in 0..dim {
                let d = row[i] - mean[i];
                mean[i] += d / n;
                m2[i] += d * (row[i] - mean[i]);
            }
        }
        let std = m2
            .iter()
            .map(|v| {
                let s = (v / n.max(1.0)).sqrt();
                if s > 1e-8 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, std }
    }

    fn apply<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
    }
}

#[derive(Debug, Clone)]
pub struct EnvironmentModel {
    state_dim: usize,
    n_actions: usize,
    config: EnvModelConfig,
    net: Option<Mlp>,
    input: Scaler,
    delta: Scaler,
    target_std: Vec<f64>,
    samples_seen: usize,
    last_report: Option<TrainReport>,
}

impl EnvironmentModel {
    pub fn new(state_dim: usize, n_actions: usize, config: EnvModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(EnvironmentModel {
            state_dim,
            n_actions,
            config,
            net: None,
            input: Scaler::default(),
            delta: Scaler::default(),
            target_std: Vec::new(),
            samples_seen: 0,
            last_report: None,
        })
    }

    pub fn config(&self) -> &EnvModelConfig {
        &self.config
    }

    pub fn samples_seen(&self) -> usize {
        self.samples_seen
    }

    pub fn last_report(&self) -> Option<&TrainReport> {
        self.last_report.as_ref()
    }

    fn features(&self, state: &[f64], action: usize) -> Vec<f64> {
        let mut x: Vec<f64> = self.input.apply(state).collect();
        x.extend((0..self.n_actions).map(|a| if a == action { 1.0 } else { 0.0 }));
        x
    }
}

impl ForwardModel for EnvironmentModel {
    fn is_ready(&self) -> bool {
        self.net.is_some()
    }

    fn predict(&self, state: &[f64], action: usize) -> Result<Vec<f64>> {
        let net = self.net.as_ref().ok_or(Error::ModelNotReady {
            have: self.samples_seen,
            need: self.config.min_samples,
        })?;
        if state.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "model state",
                expected: self.state_dim,
                actual: state.len(),
            });
        }
        if action >= self.n_actions {
            return Err(Error::OutOfRange {
                what: "action",
                index: action,
                len: self.n_actions,
            });
        }
        let out = net.forward(&self.features(state, action));
        Ok(state
            .iter()
            .zip(out)
            .zip(self.delta.mean.iter().zip(&self.delta.std))
            .map(|((s, z), (m, sd))| s + z * sd + m)
            .collect())
    }
}

/// Retrains `model` from scratch on the replay memory and reports the
/// held-out error. Fails with [`Error::ModelNotReady`] below the configured
/// minimum sample count; the model keeps its previous state in that case.
pub fn train_env_model<R: Rng + ?Sized>(
    model: &mut EnvironmentModel,
    memory: &ReplayMemory,
    epochs: usize,
    holdout_fraction: f64,
    rng: &mut R,
) -> Result<TrainReport> {
    let cfg = model.config.clone();
    if memory.len() < cfg.min_samples.max(2) {
        return Err(Error::ModelNotReady {
            have: memory.len(),
            need: cfg.min_samples.max(2),
        });
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::Config("holdout_fraction must lie in [0, 1)".into()));
    }
    let skip = cfg
        .max_samples
        .map_or(0, |m| memory.len().saturating_sub(m));
    let data: Vec<_> = memory.iter().skip(skip).collect();
    if let Some(t) = data.iter().find(|t| t.state.len() != model.state_dim || t.action >= model.n_actions) {
        return Err(Error::Dimension {
            what: "replay transition for env model",
            expected: model.state_dim,
            actual: t.state.len(),
        });
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let n_hold = ((data.len() as f64) * holdout_fraction).round() as usize;
    let n_hold = n_hold.min(data.len() - 1);
    let (held, train) = order.split_at(n_hold);

    let dim = model.state_dim;
    model.input = Scaler::fit(train.iter().map(|&i| data[i].state.as_slice()), dim);
    let deltas: Vec<Vec<f64>> = data
        .iter()
        .map(|t| t.next_state.iter().zip(&t.state).map(|(n, s)| n - s).collect())
        .collect();
    model.delta = Scaler::fit(train.iter().map(|&i| deltas[i].as_slice()), dim);
    model.target_std = Scaler::fit(train.iter().map(|&i| data[i].next_state.as_slice()), dim).std;

    let mut init_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut net = Mlp::new(&[dim + model.n_actions, cfg.hidden, dim], &mut init_rng)?;
    let mut opt = Optimizer::new(OptimizerKind::Adam, cfg.learning_rate, net.num_parameters());

    let inputs: Vec<Vec<f64>> = data.iter().map(|t| model.features(&t.state, t.action)).collect();
    let targets: Vec<Vec<f64>> = deltas.iter().map(|d| model.delta.apply(d).collect()).collect();

    let mut train_order = train.to_vec();
    let mut d_out = vec![0.0; dim];
    for _ in 0..epochs {
        train_order.shuffle(rng);
        for chunk in train_order.chunks(cfg.batch_size) {
            let mut grads = net.zero_gradients();
            let scale = 2.0 / (chunk.len() * dim) as f64;
            for &i in chunk {
                let acts = net.forward_cached(&inputs[i]);
                for ((d, o), y) in d_out.iter_mut().zip(acts.output()).zip(&targets[i]) {
                    *d = scale * (o - y);
                }
                net.backward(&acts, &d_out, &mut grads);
            }
            opt.step(&mut net, &grads);
        }
    }
    model.net = Some(net);
    model.samples_seen = data.len();

    let eval: &[usize] = if held.is_empty() { train } else { held };
    let mut mse = vec![0.0; dim];
    for &i in eval {
        let t = data[i];
        let pred = model.predict(&t.state, t.action)?;
        for ((m, p), y) in mse.iter_mut().zip(&pred).zip(&t.next_state) {
            *m += (p - y) * (p - y) / eval.len() as f64;
        }
    }
    let standardized = mse
        .iter()
        .zip(&model.target_std)
        .map(|(m, s)| m / (s * s))
        .collect();
    let report = TrainReport {
        train_samples: train.len(),
        heldout_samples: held.len(),
        heldout_mse: mse,
        heldout_mse_standardized: standardized,
    };
    model.last_report = Some(report.clone());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Transition;

    fn memory_from(f: impl Fn(&[f64], usize) -> Vec<f64>, n: usize, seed: u64) -> ReplayMemory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ReplayMemory::new(n, 1).unwrap();
        for _ in 0..n {
            let s: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = rng.random_range(0..3);
            let next = f(&s, a);
            m.store(Transition {
                state: s,
                action: a,
                reward: vec![0.0],
                next_state: next,
                terminal: false,
            })
            .unwrap();
        }
        m
    }

    #[test]
    fn below_minimum_is_not_ready() {
        let mut model = EnvironmentModel::new(2, 3, EnvModelConfig::default()).unwrap();
        let mem = memory_from(|s, _| s.to_vec(), 999, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            train_env_model(&mut model, &mem, 5, 0.1, &mut rng),
            Err(Error::ModelNotReady { have: 999, need: 1000 })
        ));
        assert!(!model.is_ready());
        assert!(model.predict(&[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn learns_identity_dynamics() {
        let mut model = EnvironmentModel::new(2, 3, EnvModelConfig::default()).unwrap();
        let mem = memory_from(|s, _| s.to_vec(), 2_000, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = train_env_model(&mut model, &mem, 10, 0.2, &mut rng).unwrap();
        assert_eq!(report.heldout_samples, 400);
        assert!(report.heldout_mse.iter().all(|m| *m < 1e-3), "{report:?}");
    }
}
