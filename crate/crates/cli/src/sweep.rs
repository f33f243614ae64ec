//! Threshold sweeps over a recorded trace.

use std::fmt::Write as _;

use dinekit_core::dine::Thresholds;
use dinekit_core::exec::Execution;
use dinekit_core::trace::Trace;
use serde::Serialize;

use crate::config::SweepGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Uncertain,
    Extremum,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Uncertain => "uncertain",
            SweepKind::Extremum => "extremum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub threshold: f64,
    pub count: usize,
    /// Count per recorded decision.
    pub rate: f64,
}

/// One row per grid point: `rho` varies with `phi` held at the live value
/// for uncertain actions, and the other way round for extrema. The first
/// `grid.skip` records are ignored.
pub fn sweep(trace: &Trace, grid: &SweepGrid, execution: Execution) -> dinekit_core::Result<Vec<SweepRow>> {
    let sliced;
    let trace = match trace.first_timestep() {
        Some(first) if grid.skip > 0 => {
            sliced = trace.slice(Some(first + grid.skip), None)?;
            &sliced
        }
        _ => trace,
    };
    let live = trace.meta().thresholds;
    let n = trace.len().max(1) as f64;
    let rho_pts: Vec<Thresholds> = grid.rho.iter().map(|&rho| Thresholds { rho, ..live }).collect();
    let phi_pts: Vec<Thresholds> = grid.phi.iter().map(|&phi| Thresholds { phi, ..live }).collect();
    let mut rows = Vec::with_capacity(rho_pts.len() + phi_pts.len());
    for (t, c) in rho_pts.iter().zip(trace.sweep(&rho_pts, execution)?) {
        rows.push(SweepRow {
            kind: SweepKind::Uncertain,
            threshold: t.rho,
            count: c.uncertain,
            rate: c.uncertain as f64 / n,
        });
    }
    for (t, c) in phi_pts.iter().zip(trace.sweep(&phi_pts, execution)?) {
        rows.push(SweepRow {
            kind: SweepKind::Extremum,
            threshold: t.phi,
            count: c.extremum,
            rate: c.extremum as f64 / n,
        });
    }
    Ok(rows)
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("kind,threshold,count,rate\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.kind.as_str(), r.threshold, r.count, r.rate);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rows = vec![SweepRow {
            kind: SweepKind::Extremum,
            threshold: 0.02,
            count: 3,
            rate: 0.5,
        }];
        assert_eq!(to_csv(&rows), "kind,threshold,count,rate\nextremum,0.02,3,0.5\n");
    }
}
