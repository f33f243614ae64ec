//! M/M/c latency model for the server pool.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueueModel {
    /// Requests per second one server handles with the dimmer at zero.
    pub service_rate: f64,
    /// Service time inflation at full dimmer: `mu_eff = mu / (1 + d * factor)`.
    pub dimmer_latency_factor: f64,
    /// Decision intervals a newly added server spends booting.
    pub boot_delay: u32,
    /// Latency reported once the pool saturates (seconds).
    pub saturation_latency: f64,
    /// Utilization at which the pool counts as saturated.
    pub utilization_cap: f64,
}

impl Default for QueueModel {
    fn default() -> Self {
        QueueModel {
            service_rate: 10.0,
            dimmer_latency_factor: 0.5,
            boot_delay: 1,
            saturation_latency: 5.0,
            utilization_cap: 0.99,
        }
    }
}

impl QueueModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.service_rate > 0.0) {
            return Err(Error::Config("queue.service_rate must be positive".into()));
        }
        if !(self.dimmer_latency_factor >= 0.0) {
            return Err(Error::Config("queue.dimmer_latency_factor must be >= 0".into()));
        }
        if !(self.saturation_latency > 0.0) {
            return Err(Error::Config("queue.saturation_latency must be positive".into()));
        }
        if !(self.utilization_cap > 0.0 && self.utilization_cap < 1.0) {
            return Err(Error::Config("queue.utilization_cap must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn effective_service_rate(&self, dimmer: f64) -> f64 {
        self.service_rate / (1.0 + dimmer * self.dimmer_latency_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub avg_latency: f64,
    pub throughput: f64,
    pub utilization: f64,
}

/// Probability that an arriving request waits in an M/M/c queue with offered
/// load `a = lambda / mu`, via the Erlang-B recursion.
pub fn erlang_c(servers: u32, offered_load: f64) -> f64 {
    let c = f64::from(servers);
    let mut b = 1.0;
    for k in 1..=servers {
        b = offered_load * b / (f64::from(k) + offered_load * b);
    }
    c * b / (c - offered_load * (1.0 - b))
}

/// Average latency and throughput for one decision interval.
///
/// Latency is the M/M/c sojourn time (Erlang-C wait plus one service time),
/// never above the saturation value. At or beyond the utilization cap the
/// latency is the saturation value and throughput the pool capacity.
pub fn simulate_interval(
    servers: u32,
    dimmer: f64,
    arrival_rate: f64,
    model: &QueueModel,
) -> IntervalMetrics {
    let servers = servers.max(1);
    let mu = model.effective_service_rate(dimmer);
    let capacity = f64::from(servers) * mu;
    let utilization = arrival_rate / capacity;
    if utilization >= model.utilization_cap {
        return IntervalMetrics {
            avg_latency: model.saturation_latency,
            throughput: capacity.min(arrival_rate),
            utilization,
        };
    }
    let service_time = 1.0 / mu;
    let latency = if arrival_rate <= 0.0 {
        service_time
    } else {
        let wait = erlang_c(servers, arrival_rate / mu) / (capacity - arrival_rate);
        wait + service_time
    };
    IntervalMetrics {
        avg_latency: latency.min(model.saturation_latency),
        throughput: arrival_rate,
        utilization,
    }
}
