//! Cliff-walk gridworld used as a learning sanity fixture.
//!
//! The agent starts in the bottom-left cell and must reach the bottom-right
//! cell; the cells between them form the cliff. Every move costs `-1` on the
//! step channel, and stepping into the cliff additionally yields `-100` on
//! the cliff channel and ends the episode.

use super::{Environment, StepOutcome};
use crate::{Error, Result};

pub const GRID_ACTIONS: [&str; 4] = ["Up", "Right", "Down", "Left"];

#[derive(Debug, Clone)]
pub struct CliffWalk {
    rows: usize,
    cols: usize,
    pos: (usize, usize),
    max_steps: usize,
    steps: usize,
}

impl Default for CliffWalk {
    fn default() -> Self {
        Self::new(4, 12, 100)
    }
}

impl CliffWalk {
    /// `max_steps` truncates an episode (reported as terminal).
    pub fn new(rows: usize, cols: usize, max_steps: usize) -> Self {
        assert!(rows >= 2 && cols >= 3, "cliff walk needs at least 2x3 cells");
        CliffWalk {
            rows,
            cols,
            pos: (rows - 1, 0),
            max_steps,
            steps: 0,
        }
    }

    pub fn start(&self) -> (usize, usize) {
        (self.rows - 1, 0)
    }

    pub fn goal(&self) -> (usize, usize) {
        (self.rows - 1, self.cols - 1)
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell_index(&self, pos: (usize, usize)) -> usize {
        pos.0 * self.cols + pos.1
    }

    pub fn is_cliff(&self, (r, c): (usize, usize)) -> bool {
        r == self.rows - 1 && c > 0 && c < self.cols - 1
    }

    /// Length of the shortest start-to-goal path that avoids the cliff.
    pub fn shortest_path_len(&self) -> usize {
        // up, across, down
        self.cols + 1
    }

    /// Deterministic successor, ignoring episode bookkeeping.
    pub fn successor(&self, (r, c): (usize, usize), action: usize) -> (usize, usize) {
        match action {
            0 => (r.saturating_sub(1), c),
            1 => (r, (c + 1).min(self.cols - 1)),
            2 => ((r + 1).min(self.rows - 1), c),
            _ => (r, c.saturating_sub(1)),
        }
    }

    fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n_cells()];
        v[self.cell_index(self.pos)] = 1.0;
        v
    }
}

impl Environment for CliffWalk {
    fn observation_dim(&self) -> usize {
        self.n_cells()
    }

    fn n_actions(&self) -> usize {
        GRID_ACTIONS.len()
    }

    fn channel_names(&self) -> Vec<String> {
        vec!["Step".into(), "Cliff".into()]
    }

    fn action_names(&self) -> Vec<String> {
        GRID_ACTIONS.iter().map(|s| s.to_string()).collect()
    }

    fn state_names(&self) -> Vec<String> {
        vec!["row".into(), "col".into()]
    }

    fn observation(&self) -> Vec<f64> {
        self.one_hot()
    }

    fn raw_state(&self) -> Vec<f64> {
        vec![self.pos.0 as f64, self.pos.1 as f64]
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = self.start();
        self.steps = 0;
        self.one_hot()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if action >= GRID_ACTIONS.len() {
            return Err(Error::OutOfRange {
                what: "action",
                index: action,
                len: GRID_ACTIONS.len(),
            });
        }
        self.pos = self.successor(self.pos, action);
        self.steps += 1;
        let fell = self.is_cliff(self.pos);
        let reward = vec![-1.0, if fell { -100.0 } else { 0.0 }];
        let terminal = fell || self.pos == self.goal() || self.steps >= self.max_steps;
        Ok(StepOutcome {
            observation: self.one_hot(),
            reward,
            terminal,
        })
    }

    fn is_truncated(&self) -> bool {
        self.steps >= self.max_steps && !self.is_cliff(self.pos) && self.pos != self.goal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_returns_start() {
        let mut g = CliffWalk::default();
        g.step(0).unwrap();
        let obs = g.reset();
        assert_eq!(g.position(), g.start());
        assert_eq!(obs[g.cell_index(g.start())], 1.0);
        assert_eq!(obs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn falling_off_is_terminal() {
        let mut g = CliffWalk::default();
        let out = g.step(1).unwrap();
        assert!(out.terminal);
        assert_eq!(out.reward, vec![-1.0, -100.0]);
    }

    #[test]
    fn safe_shortest_path_returns_minus_thirteen() {
        let mut g = CliffWalk::default();
        let plan = std::iter::once(0).chain(std::iter::repeat_n(1, 11)).chain([2]);
        let mut total = 0.0;
        let mut last = None;
        for a in plan {
            let out = g.step(a).unwrap();
            total += out.reward.iter().sum::<f64>();
            last = Some(out.terminal);
        }
        assert_eq!(last, Some(true));
        assert_eq!(g.position(), g.goal());
        assert_eq!(total, -13.0);
        assert_eq!(g.shortest_path_len(), 13);
    }

    #[test]
    fn walls_clamp_moves() {
        let g = CliffWalk::default();
        assert_eq!(g.successor((0, 0), 0), (0, 0));
        assert_eq!(g.successor((0, 0), 3), (0, 0));
        assert_eq!(g.successor((0, 11), 1), (0, 11));
        assert_eq!(g.successor((3, 0), 2), (3, 0));
    }

    #[test]
    fn truncation_is_flagged() {
        let mut g = CliffWalk::new(4, 12, 3);
        for _ in 0..3 {
            g.step(0).unwrap();
        }
        assert!(g.is_truncated());
    }
}
