//! Eight-connected noisy grid worlds and a multi-leg expert generator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demos::{DemoRecord, DemoSet};
use crate::error::{Error, Result};
use crate::mdp::Mdp;

use super::random_mdp::expert_action;

/// Moves in action order N, NE, E, SE, S, SW, W, NW with `y = 0` on top.
pub const DIRECTIONS: [(i64, i64); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];
pub const NORTH: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    /// Inaccessible `(x, y)` cells.
    pub walls: Vec<(usize, usize)>,
    /// Probability of moving in the intended direction; the two adjacent
    /// directions share the rest.
    pub success_prob: f64,
    pub discount: f64,
}

impl GridWorldSpec {
    pub fn empty(width: usize, height: usize) -> Self {
        GridWorldSpec { width, height, walls: Vec::new(), success_prob: 0.7, discount: 0.9 }
    }

    /// 20 x 20 world with a horizontal bar of nine wall cells in the middle.
    pub fn wall_bar() -> Self {
        GridWorldSpec { walls: (5..14).map(|x| (x, 10)).collect(), ..Self::empty(20, 20) }
    }
}

/// A grid world MDP plus the mapping between states and cells. States
/// enumerate the free cells in row-major order.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub spec: GridWorldSpec,
    pub mdp: Mdp,
    cells: Vec<(usize, usize)>,
    state_of_cell: Vec<Option<usize>>,
}

impl GridWorld {
    pub fn state(&self, x: usize, y: usize) -> Option<usize> {
        if x < self.spec.width && y < self.spec.height {
            self.state_of_cell[y * self.spec.width + x]
        } else {
            None
        }
    }

    pub fn cell(&self, s: usize) -> (usize, usize) {
        self.cells[s]
    }

    pub fn n_states(&self) -> usize {
        self.cells.len()
    }

    pub fn euclidean(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.cells[a];
        let (bx, by) = self.cells[b];
        ((ax as f64 - bx as f64).powi(2) + (ay as f64 - by as f64).powi(2)).sqrt()
    }

    /// Cell reached by a successful move in `dir`; blocked moves stay.
    pub fn step_target(&self, s: usize, dir: usize) -> usize {
        step_target(&self.spec, &self.cells, &self.state_of_cell, s, dir)
    }
}

fn step_target(spec: &GridWorldSpec, cells: &[(usize, usize)], state_of_cell: &[Option<usize>], s: usize, dir: usize) -> usize {
    let (x, y) = cells[s];
    let (dx, dy) = DIRECTIONS[dir];
    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
    if nx < 0 || ny < 0 || nx as usize >= spec.width || ny as usize >= spec.height {
        return s;
    }
    state_of_cell[ny as usize * spec.width + nx as usize].unwrap_or(s)
}

pub fn make_gridworld(spec: GridWorldSpec) -> Result<GridWorld> {
    if !(spec.success_prob > 0.0 && spec.success_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!("success probability must lie in (0, 1], got {}", spec.success_prob)));
    }
    let mut state_of_cell = vec![None; spec.width * spec.height];
    let mut cells = Vec::new();
    for y in 0..spec.height {
        for x in 0..spec.width {
            if !spec.walls.contains(&(x, y)) {
                state_of_cell[y * spec.width + x] = Some(cells.len());
                cells.push((x, y));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidArgument("grid world has no free cell".into()));
    }
    let ns = cells.len();
    let na = DIRECTIONS.len();
    let slip = (1.0 - spec.success_prob) / 2.0;
    let step = |s, dir| step_target(&spec, &cells, &state_of_cell, s, dir);
    let mut transition = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            row[step(s, a)] += spec.success_prob;
            if slip > 0.0 {
                row[step(s, (a + 1) % na)] += slip;
                row[step(s, (a + na - 1) % na)] += slip;
            }
        }
    }
    let mdp = Mdp::new(ns, na, spec.discount, transition)?;
    Ok(GridWorld { spec, mdp, cells, state_of_cell })
}

/// Draws a successor of `(s, a)`.
pub fn sample_successor<R: Rng + ?Sized>(mdp: &Mdp, s: usize, a: usize, rng: &mut R) -> usize {
    let mut u: f64 = rng.gen();
    let succ = mdp.successors(s, a);
    for &(t, p) in succ {
        if u < p {
            return t;
        }
        u -= p;
    }
    succ.last().expect("rows sum to one").0
}

/// Expert run through consecutive leg targets.
#[derive(Debug, Clone)]
pub struct LegDemos {
    /// Records carry both the executed action and the observed successor.
    pub demos: DemoSet,
    /// Leg index of every record.
    pub phases: Vec<usize>,
    pub targets: Vec<usize>,
}

/// Follows the greedy subgoal policy of each leg target in turn until it is
/// reached, recording one decision per step. `policy_of(g)` returns the
/// greedy policy for target `g`; each decision is the greedy action with
/// probability `optimal_prob` and a uniformly drawn other action otherwise.
/// Legs longer than `max_steps` are cut off.
pub fn leg_trajectory<R, F>(
    mdp: &Mdp,
    start: usize,
    targets: &[usize],
    policy_of: F,
    optimal_prob: f64,
    max_steps: usize,
    rng: &mut R,
) -> Result<LegDemos>
where
    R: Rng + ?Sized,
    F: Fn(usize) -> Vec<usize>,
{
    let mut records = Vec::new();
    let mut phases = Vec::new();
    let mut s = start;
    for (leg, &g) in targets.iter().enumerate() {
        let policy = policy_of(g);
        let mut steps = 0;
        while s != g && steps < max_steps {
            let a = expert_action(&policy, mdp.n_actions(), s, optimal_prob, rng);
            let next = sample_successor(mdp, s, a, rng);
            let t = records.len() as f64;
            records.push(DemoRecord { trajectory: 0, state: s, action: Some(a), successor: Some(next), timestamp: Some(t) });
            phases.push(leg);
            s = next;
            steps += 1;
        }
    }
    Ok(LegDemos { demos: DemoSet::new(records)?, phases, targets: targets.to_vec() })
}
