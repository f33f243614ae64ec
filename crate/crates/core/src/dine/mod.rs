//! Decomposed interestingness elements.
//!
//! Three kinds of element are derived from the per-channel Q-values of the
//! aggregated agent:
//!
//! * reward channel dominance: absolute and worst-action-relative Q-values
//!   per channel ([`dominance`]),
//! * uncertain actions: channels whose preferred action differs from the
//!   chosen one by a normalized gap of at least `rho` ([`detect_uncertain`]),
//! * reward channel extrema: states whose predicted successors are all
//!   worse (maximum) or all better (minimum) by more than `phi`
//!   ([`detect_extrema`]), which needs a learned forward model
//!   ([`EnvironmentModel`]).

mod counterfactual;
mod dominance;
mod extremum;
mod model;
mod uncertain;

pub use counterfactual::render_counterfactual;
pub use dominance::{dominance, DominanceChart};
pub use extremum::{
    detect_extrema, extrema_from_probe, probe_extrema, state_value, ExtremaOutcome,
    ExtremumDine, ExtremumKind, ExtremumProbe, ForwardModel, Scope,
};
pub use model::{train_env_model, EnvModelConfig, EnvironmentModel, TrainReport};
pub use uncertain::{detect_uncertain, ContrastiveEntry, UncertainActionDine};

use serde::{Deserialize, Serialize};

use crate::agent::QMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Minimum normalized gap for an uncertain-action entry, in `[0, 1]`.
    pub rho: f64,
    /// Margin in Q-value units for extrema, `>= 0`.
    pub phi: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { rho: 0.3, phi: 0.1 }
    }
}

impl Thresholds {
    pub fn new(rho: f64, phi: f64) -> Result<Self> {
        let t = Thresholds { rho, phi };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::Config(format!("phi must be >= 0, got {}", self.phi)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Dine {
    Dominance(DominanceChart),
    UncertainAction(UncertainActionDine),
    Extremum(ExtremumDine),
}

impl Dine {
    pub fn timestep(&self) -> u64 {
        match self {
            Dine::Dominance(d) => d.timestep,
            Dine::UncertainAction(d) => d.timestep,
            Dine::Extremum(d) => d.timestep,
        }
    }
}

/// Threshold-dependent DINEs of one decision: the uncertain action (if any)
/// followed by the extrema of the stored probe (if any).
///
/// Live detection and re-filtering both go through this function, so the two
/// agree exactly for equal inputs.
pub fn detect_dines(
    q: &QMatrix,
    chosen_action: usize,
    probe: Option<&ExtremumProbe>,
    thresholds: Thresholds,
    timestep: u64,
) -> Vec<Dine> {
    let mut out: Vec<Dine> = detect_uncertain(q, chosen_action, thresholds.rho)
        .map(|d| Dine::UncertainAction(d.at(timestep)))
        .into_iter()
        .collect();
    if let Some(p) = probe {
        out.extend(
            extrema_from_probe(p, thresholds.phi, timestep)
                .into_iter()
                .map(Dine::Extremum),
        );
    }
    out
}
