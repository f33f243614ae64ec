use std::collections::VecDeque;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One `(s, a, r, s', terminal)` step with a reward entry per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: Vec<f64>,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Bounded FIFO of transitions; the oldest entry is evicted once full.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    channels: usize,
    buffer: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize, channels: usize) -> Result<Self> {
        if capacity == 0 || channels == 0 {
            return Err(Error::Config(
                "replay memory needs positive capacity and channel count".into(),
            ));
        }
        Ok(ReplayMemory {
            capacity,
            channels,
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Transition> {
        self.buffer.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.buffer.get(i)
    }

    pub fn store(&mut self, t: Transition) -> Result<()> {
        if t.reward.len() != self.channels {
            return Err(Error::Dimension {
                what: "transition reward vector",
                expected: self.channels,
                actual: t.reward.len(),
            });
        }
        if t.state.len() != t.next_state.len() {
            return Err(Error::Dimension {
                what: "transition next_state",
                expected: t.state.len(),
                actual: t.next_state.len(),
            });
        }
        if let Some(first) = self.buffer.front() {
            if first.state.len() != t.state.len() {
                return Err(Error::Dimension {
                    what: "transition state",
                    expected: first.state.len(),
                    actual: t.state.len(),
                });
            }
        }
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
        Ok(())
    }

    /// Uniform draw of `batch_size` distinct transitions, or `None` while the
    /// memory holds fewer than `batch_size` entries.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Option<Vec<&Transition>> {
        if batch_size == 0 || self.buffer.len() < batch_size {
            return None;
        }
        let picks = index::sample(rng, self.buffer.len(), batch_size);
        Some(picks.iter().map(|i| &self.buffer[i]).collect())
    }

    pub fn sample_seeded(&self, batch_size: usize, seed: u64) -> Option<Vec<&Transition>> {
        self.sample(batch_size, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}
