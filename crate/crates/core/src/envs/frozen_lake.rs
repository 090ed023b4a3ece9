use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, TransitionRow};

pub const SIDE: usize = 8;
pub const GRID_STATES: usize = SIDE * SIDE;
/// Absorbing state entered from the goal.
pub const TERMINAL: usize = GRID_STATES;
pub const NUM_STATES: usize = GRID_STATES + 1;
pub const NUM_ACTIONS: usize = 5;

pub const LEFT: usize = 0;
pub const DOWN: usize = 1;
pub const RIGHT: usize = 2;
pub const UP: usize = 3;
pub const STAY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn index(self) -> usize {
        self.row * SIDE + self.col
    }

    pub fn from_index(s: usize) -> Self {
        Self::new(s / SIDE, s % SIDE)
    }

    fn in_bounds(self) -> bool {
        self.row < SIDE && self.col < SIDE
    }

    /// Neighbour in `action`'s direction; bumping into a wall stays put.
    fn step(self, action: usize) -> Self {
        let (r, c) = (self.row, self.col);
        match action {
            LEFT => Self::new(r, c.saturating_sub(1)),
            DOWN => Self::new((r + 1).min(SIDE - 1), c),
            RIGHT => Self::new(r, (c + 1).min(SIDE - 1)),
            UP => Self::new(r.saturating_sub(1), c),
            _ => self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenLakeParams {
    pub start: Cell,
    pub goal: Cell,
    pub slip: f64,
}

fn perpendicular(action: usize) -> [usize; 2] {
    match action {
        LEFT | RIGHT => [UP, DOWN],
        _ => [LEFT, RIGHT],
    }
}

/// 8x8 lake without holes. Move actions go in the intended direction with
/// probability `1 - slip` and to each perpendicular direction with
/// probability `slip / 2`; STAY never slips. Entering the goal pays 1 and
/// any action from the goal leads to the absorbing terminal state.
/// Observations are one-hot state indicators.
pub fn make_frozen_lake(params: &FrozenLakeParams, gamma: f64) -> Result<FiniteMdp> {
    let FrozenLakeParams { start, goal, slip } = *params;
    if !start.in_bounds() || !goal.in_bounds() {
        return Err(Error::invalid(format!("cells {start:?} / {goal:?} outside the 8x8 grid")));
    }
    if start == goal {
        return Err(Error::invalid("start and goal must differ"));
    }
    if !(0.0..=1.0).contains(&slip) {
        return Err(Error::invalid(format!("slip {slip} outside [0, 1]")));
    }
    let goal_idx = goal.index();
    let mut reward = Vec::with_capacity(NUM_STATES * NUM_ACTIONS);
    let mut rows: Vec<TransitionRow> = Vec::with_capacity(NUM_STATES * NUM_ACTIONS);
    for s in 0..NUM_STATES {
        for a in 0..NUM_ACTIONS {
            let row: TransitionRow = if s == TERMINAL || s == goal_idx {
                vec![(TERMINAL, 1.0)]
            } else {
                let cell = Cell::from_index(s);
                if a == STAY {
                    vec![(s, 1.0)]
                } else {
                    let [p1, p2] = perpendicular(a);
                    vec![
                        (cell.step(a).index(), 1.0 - slip),
                        (cell.step(p1).index(), slip / 2.0),
                        (cell.step(p2).index(), slip / 2.0),
                    ]
                }
            };
            let to_goal: f64 = if s == TERMINAL || s == goal_idx {
                0.0
            } else {
                row.iter().filter(|&&(t, _)| t == goal_idx).map(|&(_, p)| p).sum()
            };
            reward.push(to_goal.min(1.0));
            rows.push(row);
        }
    }
    let mut initial = vec![0.0; NUM_STATES];
    initial[start.index()] = 1.0;
    let observations = (0..NUM_STATES)
        .map(|s| {
            let mut o = vec![0.0; NUM_STATES];
            o[s] = 1.0;
            o
        })
        .collect();
    FiniteMdp::from_sparse(NUM_ACTIONS, reward, rows, initial, gamma, observations)
}
