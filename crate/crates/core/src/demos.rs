//! Expert demonstration records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub trajectory: usize,
    pub state: usize,
    pub action: Option<usize>,
    pub successor: Option<usize>,
    pub timestamp: Option<f64>,
}

impl DemoRecord {
    pub fn state_action(trajectory: usize, state: usize, action: usize) -> Self {
        DemoRecord { trajectory, state, action: Some(action), successor: None, timestamp: None }
    }

    pub fn state_successor(trajectory: usize, state: usize, successor: usize) -> Self {
        DemoRecord { trajectory, state, action: None, successor: Some(successor), timestamp: None }
    }

    pub fn at(mut self, t: f64) -> Self {
        self.timestamp = Some(t);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoKind {
    StateAction,
    StateSuccessor,
}

/// Demonstrations of one homogeneous kind. Records of a trajectory are
/// stored contiguously in recording order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSet {
    records: Vec<DemoRecord>,
    kind: DemoKind,
}

pub const DEFAULT_TRAJECTORY_GAP_FACTOR: f64 = 10.0;

impl DemoSet {
    /// Infers the kind from the populated fields: state-action when every
    /// record has an action, state-successor when every record has a
    /// successor instead.
    pub fn new(records: Vec<DemoRecord>) -> Result<Self> {
        let kind = if records.iter().all(|r| r.action.is_some()) {
            DemoKind::StateAction
        } else if records.iter().all(|r| r.successor.is_some()) {
            DemoKind::StateSuccessor
        } else {
            return Err(Error::InvalidDemos(
                "records mix state-action and state-successor kinds".into(),
            ));
        };
        Self::with_kind(records, kind)
    }

    pub fn with_kind(records: Vec<DemoRecord>, kind: DemoKind) -> Result<Self> {
        for (d, r) in records.iter().enumerate() {
            let ok = match kind {
                DemoKind::StateAction => r.action.is_some(),
                DemoKind::StateSuccessor => r.successor.is_some(),
            };
            if !ok {
                return Err(Error::InvalidDemos(format!("record {d} lacks the field required by {kind:?}")));
            }
        }
        let mut seen_done = std::collections::HashSet::new();
        for (d, w) in records.windows(2).enumerate() {
            if w[0].trajectory == w[1].trajectory {
                if let (Some(a), Some(b)) = (w[0].timestamp, w[1].timestamp) {
                    if !(b > a) {
                        return Err(Error::InvalidDemos(format!(
                            "timestamps not strictly increasing in trajectory {} at record {}",
                            w[1].trajectory,
                            d + 1
                        )));
                    }
                }
            } else if !seen_done.insert(w[0].trajectory) {
                return Err(Error::InvalidDemos(format!("trajectory {} is not contiguous", w[0].trajectory)));
            }
        }
        if let Some(last) = records.last() {
            if seen_done.contains(&last.trajectory) {
                return Err(Error::InvalidDemos(format!("trajectory {} is not contiguous", last.trajectory)));
            }
        }
        Ok(DemoSet { records, kind })
    }

    pub fn empty(kind: DemoKind) -> Self {
        DemoSet { records: Vec::new(), kind }
    }

    pub fn kind(&self) -> DemoKind {
        self.kind
    }

    pub fn records(&self) -> &[DemoRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: DemoRecord) -> Result<()> {
        let mut records = std::mem::take(&mut self.records);
        records.push(record);
        *self = Self::with_kind(records, self.kind)?;
        Ok(())
    }

    pub fn states(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.state).collect()
    }

    /// `(state, action)` pairs; `None` unless the set is state-action.
    pub fn state_action_pairs(&self) -> Option<Vec<(usize, usize)>> {
        self.records.iter().map(|r| r.action.map(|a| (r.state, a))).collect()
    }

    /// States and (when present) successor states, sorted and deduplicated.
    pub fn visited_states(&self) -> Vec<usize> {
        let mut v: Vec<usize> =
            self.records.iter().flat_map(|r| std::iter::once(r.state).chain(r.successor)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn check_states(&self, n_states: usize, n_actions: usize) -> Result<()> {
        for (d, r) in self.records.iter().enumerate() {
            for s in std::iter::once(r.state).chain(r.successor) {
                if s >= n_states {
                    return Err(Error::InvalidDemos(format!("record {d}: state {s} out of range for {n_states} states")));
                }
            }
            if let Some(a) = r.action {
                if a >= n_actions {
                    return Err(Error::InvalidDemos(format!("record {d}: action {a} out of range for {n_actions} actions")));
                }
            }
        }
        Ok(())
    }

    /// Times on a single axis: recorded timestamps (or the index within the
    /// trajectory when absent), with consecutive trajectories placed
    /// `gap_factor` median intra-trajectory steps apart.
    pub fn effective_timestamps(&self, gap_factor: f64) -> Vec<f64> {
        let mut local = Vec::with_capacity(self.len());
        let mut position = 0usize;
        for (d, r) in self.records.iter().enumerate() {
            if d > 0 && self.records[d - 1].trajectory != r.trajectory {
                position = 0;
            }
            local.push(r.timestamp.unwrap_or(position as f64));
            position += 1;
        }
        let mut steps: Vec<f64> = (1..self.len())
            .filter(|&d| self.records[d - 1].trajectory == self.records[d].trajectory)
            .map(|d| local[d] - local[d - 1])
            .collect();
        let step = if steps.is_empty() { 1.0 } else { quantile(&mut steps, 0.5) };
        let gap = gap_factor * step;
        let mut out = Vec::with_capacity(self.len());
        let mut offset = 0.0;
        for d in 0..self.len() {
            if d > 0 && self.records[d - 1].trajectory != self.records[d].trajectory {
                let prev_end = out[d - 1];
                offset = prev_end + gap - local[d];
            } else if d == 0 {
                offset = -local[0];
            }
            out.push(local[d] + offset);
        }
        out
    }
}
