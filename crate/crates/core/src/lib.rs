//! Explainable online reinforcement learning workbench.
//!
//! The crate bundles four pieces that together form a debugging loop for a
//! value-based adaptive-system controller:
//!
//! * [`agent`]: a reward-decomposed double DQN. One sub-agent per reward
//!   channel, greedy action selection on the summed Q-values.
//! * [`env`]: a queueing-based auto-scaling web application simulator with a
//!   three-channel reward, plus a cliff-walk gridworld fixture.
//! * [`dine`]: decomposed interestingness elements (reward channel dominance,
//!   uncertain actions, reward channel extrema) and the learned forward
//!   environment model the extrema need.
//! * [`trace`]: the append-only decision trace, Z-score views, threshold
//!   re-filtering and the line-delimited trace file.
//!
//! Data-parallel inner loops (per-channel training, per-record re-filtering,
//! threshold sweeps) run on rayon when the `parallel` feature is enabled and
//! fall back to plain iteration otherwise; see [`exec::Execution`].

pub mod agent;
pub mod dine;
pub mod env;
mod error;
pub mod exec;
pub mod nn;
pub mod trace;

pub use error::{Error, Result};

/// Index of the largest element, lowest index on ties.
///
/// Returns 0 for an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
