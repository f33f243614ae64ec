use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AggregatedAgent, Hyperparameters};
use crate::nn::Mlp;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "dinekit-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Weight dump of an agent: layer dimensions plus row-major weights and
/// biases for every online and target network. Optimizer moments are not
/// included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub hyper: Hyperparameters,
    pub step_counter: u64,
    pub epsilon: f64,
    pub channels: Vec<ChannelWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelWeights {
    pub name: String,
    pub online: Mlp,
    pub target: Mlp,
}

impl Checkpoint {
    pub(super) fn from_agent(agent: &AggregatedAgent) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            hyper: agent.hyper.clone(),
            step_counter: agent.step_counter,
            epsilon: agent.epsilon_current,
            channels: agent
                .sub_agents
                .iter()
                .map(|s| ChannelWeights {
                    name: s.channel.clone(),
                    online: s.online.network().clone(),
                    target: s.target.network().clone(),
                })
                .collect(),
        }
    }

    pub(super) fn into_agent(self) -> Result<AggregatedAgent> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let nets = self
            .channels
            .into_iter()
            .map(|c| {
                // re-validate shapes coming from disk
                let online = Mlp::from_layers(c.online.layers().to_vec())?;
                let target = Mlp::from_layers(c.target.layers().to_vec())?;
                Ok((c.name, online, target))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut agent = AggregatedAgent::from_networks(nets, self.hyper)?;
        agent.set_progress(self.step_counter, self.epsilon);
        Ok(agent)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Checkpoint(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Transition;

    #[test]
    fn checkpoint_round_trips_exactly() {
        let hyper = Hyperparameters {
            hidden_layers: vec![7, 5],
            batch_size: 1,
            ..Default::default()
        };
        let mut agent = AggregatedAgent::new(3, 4, &["x", "y"], hyper, 17).unwrap();
        let t = Transition {
            state: vec![0.1, 0.2, 0.3],
            action: 2,
            reward: vec![1.0, 2.0],
            next_state: vec![0.3, 0.2, 0.1],
            terminal: false,
        };
        agent.train_step(&[t]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.json");
        agent.to_checkpoint().save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, agent.to_checkpoint());
        let restored = AggregatedAgent::from_checkpoint(loaded).unwrap();
        let probe = [0.7, -0.2, 0.05];
        assert_eq!(restored.predict_q(&probe).unwrap(), agent.predict_q(&probe).unwrap());
        for (a, b) in restored.sub_agents().iter().zip(agent.sub_agents()) {
            assert_eq!(a.online().network().parameters(), b.online().network().parameters());
            assert_eq!(a.target().network().parameters(), b.target().network().parameters());
        }
    }

    #[test]
    fn rejects_foreign_version() {
        let agent = AggregatedAgent::new(2, 2, &["x"], Hyperparameters::default(), 1).unwrap();
        let mut cp = agent.to_checkpoint();
        cp.version = 99;
        assert!(matches!(AggregatedAgent::from_checkpoint(cp), Err(Error::Checkpoint(_))));
    }
}
