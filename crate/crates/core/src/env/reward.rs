//! Decomposed reward: user satisfaction, revenue and running costs.

use serde::{Deserialize, Serialize};

use super::Action;
use crate::{Error, Result};

/// Constants of the three reward channels.
///
/// The defaults keep the three weighted channels on a comparable scale for
/// the default queue model and workload; no channel dominates the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Channel weights (user satisfaction, revenue, costs).
    pub weights: [f64; 3],
    /// Seconds per decision interval.
    pub tau: f64,
    /// Revenue per request served with optional content.
    pub optional_revenue: f64,
    /// Revenue per request served without optional content.
    pub mandatory_revenue: f64,
    /// Cost per server per second.
    pub server_cost: f64,
    /// Total reward added for any state-changing action.
    pub action_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            weights: [4.0, 2.0, 1.0],
            tau: 60.0,
            optional_revenue: 6e-4,
            mandatory_revenue: 4e-4,
            server_cost: 5e-3,
            action_penalty: -0.1,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config("reward.tau must be positive".into()));
        }
        if !(self.optional_revenue > self.mandatory_revenue && self.mandatory_revenue > 0.0) {
            return Err(Error::Config(
                "reward revenues must satisfy optional > mandatory > 0".into(),
            ));
        }
        if !(self.server_cost > 0.0) {
            return Err(Error::Config("reward.server_cost must be positive".into()));
        }
        if !self.weights.iter().chain([&self.action_penalty]).all(|w| w.is_finite()) {
            return Err(Error::Config("reward weights and penalty must be finite".into()));
        }
        Ok(())
    }
}

/// Raw (unweighted) channel values for one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelValues {
    pub user_satisfaction: f64,
    pub revenue: f64,
    pub costs: f64,
}

/// Piecewise-linear satisfaction in the average latency `x` (seconds).
pub fn reward_user_satisfaction(x: f64) -> f64 {
    if x <= 0.02 {
        0.5
    } else if x >= 1.0 {
        -0.5 - (x - 1.0) / 20.0
    } else {
        0.5 - (x - 0.02) / 0.98
    }
}

pub fn reward_revenue(
    tau: f64,
    arrival_rate: f64,
    dimmer: f64,
    optional_revenue: f64,
    mandatory_revenue: f64,
) -> f64 {
    tau * arrival_rate * (dimmer * optional_revenue + (1.0 - dimmer) * mandatory_revenue)
}

pub fn reward_costs(tau: f64, server_cost: f64, servers: u32) -> f64 {
    -(tau * server_cost * f64::from(servers))
}

/// Weighted reward vector. A state-changing action adds a third of the
/// action penalty to every channel, so the vector sums to the weighted total
/// plus the full penalty.
pub fn compose_reward(values: ChannelValues, action: Action, params: &RewardParams) -> [f64; 3] {
    let p = if action.is_state_changing() {
        params.action_penalty / 3.0
    } else {
        0.0
    };
    let [a, b, c] = params.weights;
    [
        a * values.user_satisfaction + p,
        b * values.revenue + p,
        c * values.costs + p,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satisfaction_breakpoints() {
        assert_eq!(reward_user_satisfaction(0.0), 0.5);
        assert_eq!(reward_user_satisfaction(0.02), 0.5);
        assert_eq!(reward_user_satisfaction(1.0), -0.5);
        assert!(reward_user_satisfaction(0.51).abs() < 1e-15);
        assert_eq!(reward_user_satisfaction(21.0), -1.5);
        let eps = 1e-12;
        for b in [0.02, 1.0] {
            let l = reward_user_satisfaction(b - eps);
            let r = reward_user_satisfaction(b + eps);
            assert!((l - r).abs() < 1e-9, "discontinuity at {b}");
        }
    }

    #[test]
    fn revenue_cases() {
        assert_eq!(reward_revenue(60.0, 10.0, 0.0, 1.5, 1.0), 600.0);
        assert_eq!(reward_revenue(60.0, 10.0, 1.0, 1.5, 1.0), 900.0);
        assert_eq!(reward_revenue(60.0, 10.0, 0.5, 1.5, 1.0), 750.0);
    }

    #[test]
    fn cost_cases() {
        assert_eq!(reward_costs(60.0, 0.01, 0), 0.0);
        assert!((reward_costs(60.0, 0.01, 10) + 6.0).abs() < 1e-12);
        let mut prev = reward_costs(60.0, 0.01, 0);
        for s in 1..20 {
            let c = reward_costs(60.0, 0.01, s);
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn compose_without_penalty() {
        let v = ChannelValues {
            user_satisfaction: 0.5,
            revenue: 1.0,
            costs: -0.2,
        };
        let r = compose_reward(v, Action::NoAdaptation, &RewardParams::default());
        assert_eq!(r, [2.0, 2.0, -0.2]);
    }

    #[test]
    fn compose_penalty_only() {
        let v = ChannelValues {
            user_satisfaction: 0.0,
            revenue: 0.0,
            costs: 0.0,
        };
        let r = compose_reward(v, Action::AddServer, &RewardParams::default());
        for x in r {
            assert_eq!(x, -0.1 / 3.0);
        }
        assert!((r.iter().sum::<f64>() + 0.1).abs() < 1e-15);
    }

    #[test]
    fn default_params_are_valid() {
        RewardParams::default().validate().unwrap();
        let bad = RewardParams {
            optional_revenue: 1.0,
            mandatory_revenue: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
