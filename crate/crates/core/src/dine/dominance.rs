use serde::{Deserialize, Serialize};

use crate::agent::QMatrix;
use crate::argmax;

/// Per-channel contributions to one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceChart {
    pub timestep: u64,
    /// Raw Q-values, `channels x actions`.
    pub absolute: Vec<Vec<f64>>,
    /// Q-values with each channel's worst action shifted to zero.
    pub relative: Vec<Vec<f64>>,
    pub chosen_action: usize,
    /// Channel with the largest relative value at the chosen action.
    pub dominant_channel: usize,
}

impl DominanceChart {
    pub fn at(mut self, timestep: u64) -> Self {
        self.timestep = timestep;
        self
    }

    pub fn relative_totals(&self) -> Vec<f64> {
        column_sums(&self.relative)
    }

    pub fn absolute_totals(&self) -> Vec<f64> {
        column_sums(&self.absolute)
    }
}

fn column_sums(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut sums = vec![0.0; rows.first().map_or(0, Vec::len)];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Worst-action-relative row: `q[a] - min(q)`.
pub(crate) fn relative_row(row: &[f64]) -> Vec<f64> {
    let worst = row.iter().copied().fold(f64::INFINITY, f64::min);
    row.iter().map(|q| q - worst).collect()
}

pub fn dominance(q: &QMatrix, chosen_action: usize) -> DominanceChart {
    let relative: Vec<Vec<f64>> = q.rows().iter().map(|r| relative_row(r)).collect();
    let at_chosen: Vec<f64> = relative.iter().map(|r| r[chosen_action]).collect();
    DominanceChart {
        timestep: 0,
        absolute: q.rows().to_vec(),
        dominant_channel: argmax(&at_chosen),
        relative,
        chosen_action,
    }
}
