use serde::{Deserialize, Serialize};

use crate::agent::{ActionValues, QMatrix};
use crate::{Error, Result};

/// Predicts the successor observation of `(state, action)`.
pub trait ForwardModel {
    fn is_ready(&self) -> bool;
    fn predict(&self, state: &[f64], action: usize) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Channel(usize),
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremumDine {
    pub timestep: u64,
    pub scope: Scope,
    pub kind: ExtremumKind,
    pub state_value: f64,
    /// Value of the predicted successor for every action.
    pub predicted_next_values: Vec<f64>,
}

impl ExtremumDine {
    /// Re-checks the defining inequality against the stored values.
    pub fn holds(&self, phi: f64) -> bool {
        match self.kind {
            ExtremumKind::Maximum => self
                .predicted_next_values
                .iter()
                .all(|v| *v < self.state_value - phi),
            ExtremumKind::Minimum => self
                .predicted_next_values
                .iter()
                .all(|v| *v > self.state_value + phi),
        }
    }
}

/// Everything extremum detection needs, captured at decision time so that
/// thresholds can be re-applied later without the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremumProbe {
    /// Predicted successor observation per action.
    pub predicted_next_states: Vec<Vec<f64>>,
    /// State value per scope: channels in order, then the aggregate.
    pub state_values: Vec<f64>,
    /// `scopes x actions` values of the predicted successors.
    pub next_values: Vec<Vec<f64>>,
}

impl ExtremumProbe {
    pub fn scope(&self, i: usize) -> Scope {
        if i + 1 == self.state_values.len() {
            Scope::Aggregate
        } else {
            Scope::Channel(i)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremaOutcome {
    /// True when the model was not ready and detection was skipped.
    pub suppressed: bool,
    pub probe: Option<ExtremumProbe>,
    pub dines: Vec<ExtremumDine>,
}

/// Greedy action-value of a row.
pub fn state_value(q_row: &[f64]) -> f64 {
    q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Per-scope state values of a Q matrix: each channel's own greedy value and
/// the greedy value of the summed Q-values.
fn scope_values(q: &QMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = q.rows().iter().map(|r| state_value(r)).collect();
    v.push(state_value(&q.column_sums()));
    v
}

pub fn probe_extrema<A, M>(agent: &A, model: &M, state: &[f64]) -> Result<Option<ExtremumProbe>>
where
    A: ActionValues + ?Sized,
    M: ForwardModel + ?Sized,
{
    if !model.is_ready() {
        return Ok(None);
    }
    let current = scope_values(&agent.q_matrix(state)?);
    let n_actions = agent.n_actions();
    let mut predicted = Vec::with_capacity(n_actions);
    let mut next_values = vec![Vec::with_capacity(n_actions); current.len()];
    for a in 0..n_actions {
        let next = model.predict(state, a)?;
        if next.len() != state.len() {
            return Err(Error::Dimension {
                what: "predicted state",
                expected: state.len(),
                actual: next.len(),
            });
        }
        for (scope, v) in scope_values(&agent.q_matrix(&next)?).into_iter().enumerate() {
            next_values[scope].push(v);
        }
        predicted.push(next);
    }
    Ok(Some(ExtremumProbe {
        predicted_next_states: predicted,
        state_values: current,
        next_values,
    }))
}

/// Applies the `phi` margin to a stored probe.
pub fn extrema_from_probe(probe: &ExtremumProbe, phi: f64, timestep: u64) -> Vec<ExtremumDine> {
    let mut out = Vec::new();
    for (i, (v, next)) in probe.state_values.iter().zip(&probe.next_values).enumerate() {
        let hi = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = next.iter().copied().fold(f64::INFINITY, f64::min);
        let kind = if hi < v - phi {
            ExtremumKind::Maximum
        } else if lo > v + phi {
            ExtremumKind::Minimum
        } else {
            continue;
        };
        out.push(ExtremumDine {
            timestep,
            scope: probe.scope(i),
            kind,
            state_value: *v,
            predicted_next_values: next.clone(),
        });
    }
    out
}

pub fn detect_extrema<A, M>(
    agent: &A,
    model: &M,
    state: &[f64],
    phi: f64,
    timestep: u64,
) -> Result<ExtremaOutcome>
where
    A: ActionValues + ?Sized,
    M: ForwardModel + ?Sized,
{
    Ok(match probe_extrema(agent, model, state)? {
        None => ExtremaOutcome {
            suppressed: true,
            probe: None,
            dines: Vec::new(),
        },
        Some(probe) => ExtremaOutcome {
            suppressed: false,
            dines: extrema_from_probe(&probe, phi, timestep),
            probe: Some(probe),
        },
    })
}
