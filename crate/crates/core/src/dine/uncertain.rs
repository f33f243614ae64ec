use serde::{Deserialize, Serialize};

use super::dominance::relative_row;
use crate::agent::QMatrix;
use crate::argmax;

/// A channel that would rather take a different action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveEntry {
    pub channel: usize,
    pub preferred_action: usize,
    /// `1 - rel[chosen] / max(rel)` for the channel's relative row.
    pub normalized_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainActionDine {
    pub timestep: u64,
    pub chosen_action: usize,
    /// Ordered by channel index.
    pub contrastive: Vec<ContrastiveEntry>,
}

impl UncertainActionDine {
    pub fn at(mut self, timestep: u64) -> Self {
        self.timestep = timestep;
        self
    }
}

/// Flags the decision when at least one channel disagrees with the chosen
/// action by a normalized gap of at least `rho`.
///
/// Each channel's worst-relative row is divided by its maximum so the
/// channel's own favourite scores 1; a channel whose row is flat abstains.
pub fn detect_uncertain(q: &QMatrix, chosen_action: usize, rho: f64) -> Option<UncertainActionDine> {
    let contrastive: Vec<ContrastiveEntry> = q
        .rows()
        .iter()
        .enumerate()
        .filter_map(|(channel, row)| {
            let rel = relative_row(row);
            let preferred = argmax(&rel);
            let top = rel[preferred];
            if top <= 0.0 || preferred == chosen_action {
                return None;
            }
            let gap = 1.0 - rel[chosen_action] / top;
            (gap >= rho).then_some(ContrastiveEntry {
                channel,
                preferred_action: preferred,
                normalized_gap: gap,
            })
        })
        .collect();
    (!contrastive.is_empty()).then_some(UncertainActionDine {
        timestep: 0,
        chosen_action,
        contrastive,
    })
}
