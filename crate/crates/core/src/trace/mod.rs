//! Append-only decision trace.
//!
//! Every decision of the agent becomes one [`TraceRecord`]. Records keep the
//! full per-channel Q matrix and, once the environment model is trained, the
//! extremum probe, so any threshold pair can be re-applied later without the
//! agent or the model ([`Trace::refilter`]).

mod file;

pub use file::{TRACE_FORMAT, TRACE_VERSION};

use serde::{Deserialize, Serialize};

use crate::agent::QMatrix;
use crate::dine::{detect_dines, Dine, ExtremumProbe, Thresholds};
use crate::exec::Execution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub timestep: u64,
    /// Unscaled state before the decision.
    pub raw_state: Vec<f64>,
    pub action: usize,
    /// Reward per channel received for `action`.
    pub reward: Vec<f64>,
    pub q_values: QMatrix,
    pub epsilon: f64,
    /// True when the action came from the random branch.
    pub exploratory: bool,
    /// Thresholds in force when the record was detected.
    pub thresholds: Thresholds,
    pub dines: Vec<Dine>,
    /// Absent while the environment model was not ready.
    pub extremum_probe: Option<ExtremumProbe>,
}

impl TraceRecord {
    /// Scalar reward; channel rewards already carry their weights.
    pub fn total_reward(&self) -> f64 {
        self.reward.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMeta {
    pub channel_names: Vec<String>,
    pub action_names: Vec<String>,
    pub state_names: Vec<String>,
    pub channel_weights: Vec<f64>,
    /// Thresholds in force at the end of the run.
    pub thresholds: Thresholds,
    /// Hex digest of the environment configuration the trace came from.
    pub config_digest: String,
}

impl TraceMeta {
    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    fn validate(&self) -> Result<()> {
        if self.channel_names.is_empty() || self.action_names.is_empty() {
            return Err(Error::Config("trace needs at least one channel and one action".into()));
        }
        if self.channel_weights.len() != self.channel_names.len() {
            return Err(Error::Dimension {
                what: "channel weights",
                expected: self.channel_names.len(),
                actual: self.channel_weights.len(),
            });
        }
        self.thresholds.validate()
    }
}

/// One standardized state variable over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedSeries {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation; zero means the series is constant.
    pub std: f64,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedView {
    pub from: Option<u64>,
    pub to: Option<u64>,
    pub variables: Vec<StandardizedSeries>,
}

/// Z-scores with the population convention. A series whose spread is lost in
/// rounding noise counts as constant and maps to zeros.
pub fn z_scores(values: &[f64]) -> (f64, f64, Vec<f64>) {
    if values.is_empty() {
        return (0.0, 0.0, Vec::new());
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if std <= scale * 1e-12 || std == 0.0 {
        return (mean, 0.0, vec![0.0; values.len()]);
    }
    (mean, std, values.iter().map(|v| (v - mean) / std).collect())
}

/// Number of DINEs of each kind in a set of per-record DINE lists.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DineCounts {
    /// Decisions flagged as uncertain.
    pub uncertain: usize,
    /// Extremum elements, one per (decision, scope).
    pub extremum: usize,
}

impl DineCounts {
    pub fn of<'a>(sets: impl IntoIterator<Item = &'a [Dine]>) -> Self {
        let mut c = DineCounts::default();
        for d in sets.into_iter().flatten() {
            match d {
                Dine::UncertainAction(_) => c.uncertain += 1,
                Dine::Extremum(_) => c.extremum += 1,
                Dine::Dominance(_) => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    meta: TraceMeta,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Result<Self> {
        meta.validate()?;
        Ok(Trace {
            meta,
            records: Vec::new(),
        })
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn set_thresholds(&mut self, thresholds: Thresholds) -> Result<Thresholds> {
        thresholds.validate()?;
        Ok(std::mem::replace(&mut self.meta.thresholds, thresholds))
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_timestep(&self) -> Option<u64> {
        self.records.first().map(|r| r.timestep)
    }

    pub fn last_timestep(&self) -> Option<u64> {
        self.records.last().map(|r| r.timestep)
    }

    pub fn get(&self, timestep: u64) -> Option<&TraceRecord> {
        let first = self.first_timestep()?;
        let i = timestep.checked_sub(first)?;
        self.records.get(usize::try_from(i).ok()?)
    }

    /// Appends a record. The first record may start at any timestep, every
    /// later one must continue it by exactly one, and the shape must match
    /// the metadata.
    pub fn append(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(last) = self.last_timestep() {
            if record.timestep != last + 1 {
                return Err(Error::Append(format!(
                    "timestep {} does not follow {last}",
                    record.timestep
                )));
            }
        }
        let k = self.meta.n_channels();
        let a = self.meta.n_actions();
        if record.q_values.channels() != k || record.q_values.actions() != a {
            return Err(Error::Append(format!(
                "q_values are {}x{}, trace expects {k}x{a}",
                record.q_values.channels(),
                record.q_values.actions()
            )));
        }
        if record.reward.len() != k {
            return Err(Error::Append(format!(
                "reward has {} channels, trace expects {k}",
                record.reward.len()
            )));
        }
        if record.action >= a {
            return Err(Error::Append(format!("action {} out of range 0..{a}", record.action)));
        }
        let state_len = self
            .records
            .first()
            .map_or(self.meta.state_names.len(), |r| r.raw_state.len());
        if record.raw_state.len() != state_len {
            return Err(Error::Append(format!(
                "raw_state has {} entries, trace expects {state_len}",
                record.raw_state.len()
            )));
        }
        if let Some(p) = &record.extremum_probe {
            if p.state_values.len() != k + 1 || p.next_values.iter().any(|v| v.len() != a) {
                return Err(Error::Append("extremum probe shape does not match the trace".into()));
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Records with `from <= timestep <= to`, clamped to the stored range.
    /// Missing bounds mean the start or end of the trace.
    pub fn window(&self, from: Option<u64>, to: Option<u64>) -> Result<&[TraceRecord]> {
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(Error::Config(format!("window start {f} is after end {t}")));
            }
        }
        let Some(first) = self.first_timestep() else {
            return Ok(&[]);
        };
        let n = self.records.len() as u64;
        let lo = from.map_or(0, |f| f.saturating_sub(first)).min(n);
        let hi = to.map_or(n, |t| if t < first { 0 } else { (t - first + 1).min(n) });
        Ok(if lo >= hi {
            &[]
        } else {
            &self.records[lo as usize..hi as usize]
        })
    }

    /// A new trace holding a copy of [`window`](Self::window).
    pub fn slice(&self, from: Option<u64>, to: Option<u64>) -> Result<Trace> {
        Ok(Trace {
            meta: self.meta.clone(),
            records: self.window(from, to)?.to_vec(),
        })
    }

    pub fn standardize(&self, from: Option<u64>, to: Option<u64>) -> Result<StandardizedView> {
        let window = self.window(from, to)?;
        let dim = window.first().map_or(self.meta.state_names.len(), |r| r.raw_state.len());
        let variables = (0..dim)
            .map(|i| {
                let series: Vec<f64> = window.iter().map(|r| r.raw_state[i]).collect();
                let (mean, std, z) = z_scores(&series);
                StandardizedSeries {
                    name: self.meta.state_names.get(i).cloned().unwrap_or_else(|| format!("s{i}")),
                    mean,
                    std,
                    z,
                }
            })
            .collect();
        Ok(StandardizedView { from, to, variables })
    }

    /// Re-applies `thresholds` to every record of the window. The result is
    /// aligned with [`window`](Self::window); live DINEs are left untouched.
    pub fn refilter(
        &self,
        thresholds: Thresholds,
        from: Option<u64>,
        to: Option<u64>,
        execution: Execution,
    ) -> Result<Vec<Vec<Dine>>> {
        thresholds.validate()?;
        let window = self.window(from, to)?;
        Ok(execution.map(window, |r| {
            detect_dines(
                &r.q_values,
                r.action,
                r.extremum_probe.as_ref(),
                thresholds,
                r.timestep,
            )
        }))
    }

    /// DINE counts per grid point, one refilter per threshold pair.
    pub fn sweep(&self, grid: &[Thresholds], execution: Execution) -> Result<Vec<DineCounts>> {
        grid.iter().try_for_each(Thresholds::validate)?;
        let records = &self.records;
        Ok(execution.map(grid, |t| {
            let mut c = DineCounts::default();
            for r in records {
                let dines = detect_dines(&r.q_values, r.action, r.extremum_probe.as_ref(), *t, r.timestep);
                let d = DineCounts::of([dines.as_slice()]);
                c.uncertain += d.uncertain;
                c.extremum += d.extremum;
            }
            c
        }))
    }

    pub fn live_counts(&self) -> DineCounts {
        DineCounts::of(self.records.iter().map(|r| r.dines.as_slice()))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn meta() -> TraceMeta {
        TraceMeta {
            channel_names: vec!["a".into(), "b".into()],
            action_names: vec!["x".into(), "y".into(), "z".into()],
            state_names: vec!["s0".into(), "s1".into()],
            channel_weights: vec![1.0, 2.0],
            thresholds: Thresholds::default(),
            config_digest: "00".into(),
        }
    }

    pub(crate) fn record(t: u64, q: Vec<Vec<f64>>, action: usize) -> TraceRecord {
        let probe = ExtremumProbe {
            predicted_next_states: vec![vec![0.0, 0.0]; 3],
            state_values: vec![1.0, 2.0, 3.0],
            next_values: vec![vec![0.5, 0.8, 0.1], vec![2.5, 2.7, 3.0], vec![3.1, 2.9, 2.8]],
        };
        let q_values = QMatrix::new(q).unwrap();
        let thresholds = Thresholds::default();
        let dines = detect_dines(&q_values, action, Some(&probe), thresholds, t);
        TraceRecord {
            timestep: t,
            raw_state: vec![t as f64, 0.1 * t as f64 + 1.0 / 3.0],
            action,
            reward: vec![0.25, -1.0 / 7.0],
            q_values,
            epsilon: 0.1,
            exploratory: t % 3 == 0,
            thresholds,
            dines,
            extremum_probe: Some(probe),
        }
    }

    pub(crate) fn sample_trace(n: u64) -> Trace {
        let mut trace = Trace::new(meta()).unwrap();
        for t in 0..n {
            let x = t as f64 * 0.37;
            let q = vec![vec![x.sin(), x.cos(), 0.2], vec![(2.0 * x).cos(), 0.1, x.sin() * 0.5]];
            let a = (t % 3) as usize;
            trace.append(record(t, q, a)).unwrap();
        }
        trace
    }

    #[test]
    fn append_to_empty_then_continue() {
        let mut trace = Trace::new(meta()).unwrap();
        trace.append(record(0, vec![vec![0.0; 3]; 2], 0)).unwrap();
        trace.append(record(1, vec![vec![0.0; 3]; 2], 1)).unwrap();
        assert_eq!(trace.len(), 2);
    }

    #[test]
    fn gaps_and_duplicates_are_rejected() {
        let mut trace = sample_trace(3);
        assert!(matches!(trace.append(record(4, vec![vec![0.0; 3]; 2], 0)), Err(Error::Append(_))));
        assert!(trace.append(record(2, vec![vec![0.0; 3]; 2], 0)).is_err());
        assert_eq!(trace.len(), 3);
    }

    #[test]
    fn dimension_drift_is_rejected() {
        let mut trace = sample_trace(2);
        assert!(trace.append(record(2, vec![vec![0.0; 4]; 2], 0)).is_err());
        assert!(trace.append(record(2, vec![vec![0.0; 3]; 3], 0)).is_err());
        let mut r = record(2, vec![vec![0.0; 3]; 2], 0);
        r.raw_state.push(1.0);
        assert!(trace.append(r).is_err());
        let mut r = record(2, vec![vec![0.0; 3]; 2], 0);
        r.action = 3;
        assert!(trace.append(r).is_err());
        assert!(trace.append(record(2, vec![vec![0.0; 3]; 2], 0)).is_ok());
    }

    #[test]
    fn windows() {
        let trace = sample_trace(10);
        assert_eq!(trace.window(None, None).unwrap().len(), 10);
        assert_eq!(trace.window(Some(0), Some(9)).unwrap().len(), 10);
        assert_eq!(trace.window(Some(0), Some(100)).unwrap().len(), 10);
        assert!(trace.window(Some(20), Some(30)).unwrap().is_empty());
        let one = trace.window(Some(4), Some(4)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].timestep, 4);
        assert!(trace.window(Some(5), Some(4)).is_err());
        assert_eq!(trace.get(7).unwrap().timestep, 7);
        assert!(trace.get(10).is_none());
    }

    #[test]
    fn z_scores_of_one_two_three() {
        let (mean, std, z) = z_scores(&[1.0, 2.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((z[0] + 1.224744871391589).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!((z[2] - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn constant_series_maps_to_zeros() {
        let (_, std, z) = z_scores(&[0.1; 7]);
        assert_eq!(std, 0.0);
        assert_eq!(z, vec![0.0; 7]);
    }

    #[test]
    fn refilter_at_live_thresholds_is_identity() {
        let trace = sample_trace(50);
        let live: Vec<Vec<Dine>> = trace.records().iter().map(|r| r.dines.clone()).collect();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let again = trace.refilter(Thresholds::default(), None, None, exec).unwrap();
            assert_eq!(again, live);
        }
        assert!(trace.live_counts().uncertain > 0);
    }

    #[test]
    fn refilter_rejects_bad_thresholds() {
        let trace = sample_trace(5);
        assert!(trace.refilter(Thresholds { rho: 2.0, phi: 0.0 }, None, None, Execution::Sequential).is_err());
    }

    #[test]
    fn sweep_matches_refilter_counts() {
        let trace = sample_trace(60);
        let grid: Vec<Thresholds> = (0..=10).map(|i| Thresholds { rho: i as f64 / 10.0, phi: 0.02 * i as f64 }).collect();
        let swept = trace.sweep(&grid, Execution::Parallel).unwrap();
        for (t, c) in grid.iter().zip(&swept) {
            let sets = trace.refilter(*t, None, None, Execution::Sequential).unwrap();
            assert_eq!(*c, DineCounts::of(sets.iter().map(Vec::as_slice)));
        }
    }

    proptest! {
        #[test]
        fn z_scores_have_zero_mean_unit_variance(
            values in prop::collection::vec(-1e3f64..1e3, 2..200),
        ) {
            let (_, std, z) = z_scores(&values);
            prop_assume!(std > 0.0);
            let n = z.len() as f64;
            let m = z.iter().sum::<f64>() / n;
            let v = z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((v - 1.0).abs() < 1e-6);
        }

        #[test]
        fn z_scores_are_affine_invariant(
            values in prop::collection::vec(-100f64..100.0, 2..50),
            scale in 0.1f64..10.0,
            shift in -50f64..50.0,
        ) {
            let (_, std, z) = z_scores(&values);
            prop_assume!(std > 1e-6);
            let moved: Vec<f64> = values.iter().map(|v| scale * v + shift).collect();
            let (_, _, z2) = z_scores(&moved);
            for (a, b) in z.iter().zip(&z2) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn higher_thresholds_filter_subsets(lo in 0f64..=1.0, hi in 0f64..=1.0, plo in 0f64..0.5, phi in 0f64..0.5) {
            let trace = sample_trace(40);
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let (plo, phi) = if plo <= phi { (plo, phi) } else { (phi, plo) };
            let a = trace.refilter(Thresholds { rho: lo, phi: plo }, None, None, Execution::Sequential).unwrap();
            let b = trace.refilter(Thresholds { rho: hi, phi }, None, None, Execution::Sequential).unwrap();
            for (small, big) in b.iter().zip(&a) {
                for d in small {
                    let found = big.iter().any(|x| match (x, d) {
                        (Dine::UncertainAction(x), Dine::UncertainAction(d)) => {
                            d.contrastive.iter().all(|e| x.contrastive.contains(e))
                        }
                        _ => x == d,
                    });
                    prop_assert!(found);
                }
            }
        }
    }
}
