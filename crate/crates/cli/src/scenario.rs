//! Packaged scenarios.
//!
//! `demo` trains on a varying workload until the policy settles, then holds a
//! low steady load and applies a sudden step increase. `settled` records a
//! run whose last 5,000 decisions come from an almost greedy policy, for
//! threshold sweeps.

use dinekit_core::agent::Hyperparameters;
use dinekit_core::env::{EnvConfig, Phase, WorkloadConfig, WorkloadPattern};
use dinekit_core::nn::OptimizerKind;
use dinekit_core::trace::Trace;
use serde::Serialize;

use crate::config::{RunConfig, SweepGrid};

/// First decision interval whose reward is measured under the stepped load.
pub const STEP_AT: u64 = 22_575;
/// Steady low-load intervals right before the step.
pub const STEADY: u64 = 300;
pub const LOW_RATE: f64 = 30.0;
pub const HIGH_RATE: f64 = 60.0;
/// Intervals simulated after the step.
pub const AFTER: u64 = 200;

/// Learning settings under which the SWIM policy stops dithering between
/// opposite adaptations once exploration has decayed.
pub fn settled_hyper() -> Hyperparameters {
    Hyperparameters {
        discount: 0.8,
        epsilon_end: 0.01,
        epsilon_decay_steps: 5_000,
        learning_rate: 5e-4,
        optimizer: OptimizerKind::Adam,
        batch_size: 64,
        target_sync_interval: 1_000,
        ..Hyperparameters::default()
    }
}

/// Slow daily-style swing between 20 and 70 requests/s.
pub fn slow_workload() -> WorkloadPattern {
    WorkloadPattern::Sinusoid {
        mean: 45.0,
        amplitude: 25.0,
        period: 1000.0,
        phase: 0.0,
    }
}

/// Steps recorded by [`settled_config`] and the part of them the sweep skips.
pub const SETTLED_STEPS: u64 = 12_000;
pub const SETTLED_SKIP: u64 = 7_000;

pub fn settled_config() -> RunConfig {
    RunConfig {
        env: Some(EnvConfig {
            workload: WorkloadConfig {
                pattern: slow_workload(),
                noise: 0.02,
                ..WorkloadConfig::default()
            },
            ..EnvConfig::default()
        }),
        steps: SETTLED_STEPS,
        seed: 1,
        hyper: settled_hyper(),
        sweep: SweepGrid {
            skip: SETTLED_SKIP,
            ..SweepGrid::default()
        },
        ..RunConfig::default()
    }
}

pub fn demo_env() -> EnvConfig {
    // The environment draws one rate on reset and one per step, so the rate
    // of interval `t`'s reward has index `t + 1`.
    let warmup = STEP_AT + 1 - STEADY;
    EnvConfig {
        workload: WorkloadConfig {
            pattern: WorkloadPattern::Phased {
                phases: vec![
                    Phase {
                        steps: Some(warmup),
                        pattern: slow_workload(),
                    },
                    Phase {
                        steps: None,
                        pattern: WorkloadPattern::Step {
                            from: LOW_RATE,
                            to: HIGH_RATE,
                            at: STEADY,
                            peak: None,
                        },
                    },
                ],
            },
            noise: 0.02,
            ..WorkloadConfig::default()
        },
        ..EnvConfig::default()
    }
}

pub fn demo_config() -> RunConfig {
    RunConfig {
        env: Some(demo_env()),
        steps: STEP_AT + AFTER,
        seed: 7,
        hyper: settled_hyper(),
        ..RunConfig::default()
    }
}

/// How the user-satisfaction channel (channel 0) reacts to the step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResponse {
    pub step_at: u64,
    /// Mean channel reward over the steady window before the step.
    pub pre_level: f64,
    /// Lowest channel reward within the horizon after the step.
    pub trough: f64,
    /// Intervals after the step until a 5-interval mean is back within the
    /// tolerance of `pre_level`; `None` if not within the horizon.
    pub recovered_after: Option<u64>,
    pub pre: Summary,
    pub post: Summary,
}

/// Window means of the quantities involved in the trade-off.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub servers: f64,
    pub dimmer: f64,
    pub revenue: f64,
    pub costs: f64,
    /// Revenue channel per request/s of arrival rate.
    pub revenue_per_request: f64,
}

impl StepResponse {
    /// The dimmer went down and revenue per request went down with it.
    pub fn tradeoff_visible(&self) -> bool {
        self.post.dimmer < self.pre.dimmer && self.post.revenue_per_request < self.pre.revenue_per_request
    }
}

const SERVERS: usize = 3;
const DIMMER: usize = 4;
const ARRIVAL: usize = 0;

fn summarize(trace: &Trace, from: u64, to: u64) -> Option<Summary> {
    let w = trace.window(Some(from), Some(to)).ok()?;
    // state is recorded before the decision, reward after it; pair each
    // reward with the state that follows it
    let next = trace.window(Some(from + 1), Some(to + 1)).ok()?;
    if w.is_empty() || next.len() != w.len() {
        return None;
    }
    let n = w.len() as f64;
    let mean = |f: &dyn Fn(usize) -> f64| (0..w.len()).map(f).sum::<f64>() / n;
    Some(Summary {
        servers: mean(&|i| next[i].raw_state[SERVERS]),
        dimmer: mean(&|i| next[i].raw_state[DIMMER]),
        revenue: mean(&|i| w[i].reward[1]),
        costs: mean(&|i| w[i].reward[2]),
        revenue_per_request: mean(&|i| w[i].reward[1] / next[i].raw_state[ARRIVAL].max(1e-9)),
    })
}

/// Measures the response to a load step whose first affected interval is
/// `step_at`. `tolerance` is relative to the pre-step level.
pub fn analyze_step(
    trace: &Trace,
    step_at: u64,
    pre_window: u64,
    horizon: u64,
    tolerance: f64,
) -> Option<StepResponse> {
    let us = |t: u64| trace.get(t).map(|r| r.reward[0]);
    let pre: Vec<f64> = (step_at.checked_sub(pre_window)?..step_at)
        .map(us)
        .collect::<Option<_>>()?;
    let pre_level = pre.iter().sum::<f64>() / pre.len() as f64;
    let post: Vec<f64> = (step_at..=step_at + horizon + 5).map(us).collect::<Option<_>>()?;
    let trough = post[..=horizon as usize].iter().copied().fold(f64::INFINITY, f64::min);
    let band = tolerance * pre_level.abs();
    let recovered_after = (0..=horizon).find(|&d| {
        let m = post[d as usize..d as usize + 5].iter().sum::<f64>() / 5.0;
        m >= pre_level - band
    });
    let settle = step_at + recovered_after.unwrap_or(horizon);
    Some(StepResponse {
        step_at,
        pre_level,
        trough,
        recovered_after,
        pre: summarize(trace, step_at - pre_window, step_at - 1)?,
        post: summarize(trace, settle, (settle + 50).min(trace.last_timestep()? - 1))?,
    })
}
