//! Finite MDPs, exact planning and the hitting-time quasi-metric.

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// State spaces up to this size are planned with exact policy iteration
/// (dense LU solves); larger ones use iterative sweeps.
const DIRECT_SOLVE_MAX_STATES: usize = 256;

/// A finite MDP with a dense `(s, a, s')` transition tensor.
///
/// The nonzero entries of every `(s, a)` row are also kept as a sparse
/// successor list, which is what the iterative solvers sweep over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpFile", into = "MdpFile")]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    transition: Vec<f64>,
    successors: Vec<Vec<(usize, f64)>>,
}

/// On-disk layout: `transition[s][a][s']`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MdpFile {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    transition: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<MdpFile> for Mdp {
    type Error = Error;

    fn try_from(file: MdpFile) -> Result<Self> {
        if file.transition.len() != file.n_states {
            return Err(Error::InvalidMdp(format!(
                "transition has {} state rows, expected {}",
                file.transition.len(),
                file.n_states
            )));
        }
        let mut flat = Vec::with_capacity(file.n_states * file.n_actions * file.n_states);
        for (s, rows) in file.transition.iter().enumerate() {
            if rows.len() != file.n_actions {
                return Err(Error::InvalidMdp(format!(
                    "state {s} has {} action rows, expected {}",
                    rows.len(),
                    file.n_actions
                )));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != file.n_states {
                    return Err(Error::InvalidMdp(format!(
                        "row ({s}, {a}) has {} entries, expected {}",
                        row.len(),
                        file.n_states
                    )));
                }
                flat.extend_from_slice(row);
            }
        }
        Mdp::new(file.n_states, file.n_actions, file.discount, flat)
    }
}

impl From<Mdp> for MdpFile {
    fn from(mdp: Mdp) -> Self {
        let transition = (0..mdp.n_states)
            .map(|s| (0..mdp.n_actions).map(|a| mdp.row(s, a).to_vec()).collect())
            .collect();
        MdpFile {
            n_states: mdp.n_states,
            n_actions: mdp.n_actions,
            discount: mdp.discount,
            transition,
        }
    }
}

impl Mdp {
    /// `transition` is laid out as `((s * n_actions) + a) * n_states + s'`.
    pub fn new(n_states: usize, n_actions: usize, discount: f64, transition: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("state and action sets must be non-empty".into()));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidMdp(format!("discount {discount} not in [0, 1)")));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidMdp(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        let mut successors = Vec::with_capacity(n_states * n_actions);
        for (idx, row) in transition.chunks_exact(n_states).enumerate() {
            let (s, a) = (idx / n_actions, idx % n_actions);
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidMdp(format!("row ({s}, {a}) has a negative or non-finite entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidMdp(format!("row ({s}, {a}) sums to {total}")));
            }
            successors.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(t, p)| (t, *p))
                    .collect(),
            );
        }
        Ok(Mdp { n_states, n_actions, discount, transition, successors })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    /// Dense distribution `T(. | s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Nonzero entries of `T(. | s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[s * self.n_actions + a]
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::StateOutOfRange { index: s, n_states: self.n_states });
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("MDP serialization is infallible")
    }

    fn expected_next(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        self.successors(s, a).iter().map(|&(t, p)| p * values[t]).sum()
    }
}

/// Optimal state-action values `Q(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::InvalidArgument(format!(
                "Q table has {} entries, expected {}",
                values.len(),
                n_states * n_actions
            )));
        }
        Ok(QTable { n_states, n_actions, values })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_actions)
    }

    pub fn state_values(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect()
    }

    pub fn scaled(&self, factor: f64) -> QTable {
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Sup-norm Bellman optimality residual of this table under `reward`.
    pub fn bellman_residual(&self, mdp: &Mdp, reward: &[f64]) -> f64 {
        let v = self.state_values();
        let mut worst = 0.0f64;
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let backup = reward[s] + mdp.discount * mdp.expected_next(s, a, &v);
                worst = worst.max((backup - self.get(s, a)).abs());
            }
        }
        worst
    }
}

/// Expected hitting times `delta[i][j]` from `i` to `j` under the subgoal
/// policy of `j`. Unreachable pairs hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeMatrix {
    n: usize,
    delta: Vec<f64>,
}

impl HittingTimeMatrix {
    pub fn from_rows(n: usize, delta: Vec<f64>) -> Result<Self> {
        if delta.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "distance matrix has {} entries, expected {}",
                delta.len(),
                n * n
            )));
        }
        Ok(HittingTimeMatrix { n, delta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.delta[from * self.n + to]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.delta
    }

    /// Submatrix over the given node states, in order.
    pub fn restrict(&self, nodes: &[usize]) -> HittingTimeMatrix {
        let n = nodes.len();
        let mut delta = Vec::with_capacity(n * n);
        for &i in nodes {
            for &j in nodes {
                delta.push(self.get(i, j));
            }
        }
        HittingTimeMatrix { n, delta }
    }
}

fn check_reward(mdp: &Mdp, reward: &[f64]) -> Result<()> {
    if reward.len() != mdp.n_states {
        return Err(Error::InvalidArgument(format!(
            "reward has length {}, expected {}",
            reward.len(),
            mdp.n_states
        )));
    }
    if let Some(s) = reward.iter().position(|r| !r.is_finite()) {
        return Err(Error::InvalidArgument(format!("reward at state {s} is not finite")));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Synchronous value iteration from `Q = 0`, stopping once successive
/// iterates differ by at most `tol` in sup-norm.
pub fn value_iteration(mdp: &Mdp, reward: &[f64], tol: f64) -> Result<(Vec<f64>, QTable)> {
    let (v, q, _) = value_iteration_traced(mdp, reward, tol, DEFAULT_MAX_ITERATIONS)?;
    Ok((v, q))
}

/// Value iteration that also returns the sup-norm change of every sweep.
pub fn value_iteration_traced(
    mdp: &Mdp,
    reward: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, QTable, Vec<f64>)> {
    check_reward(mdp, reward)?;
    check_tol(tol)?;
    let (ns, na, gamma) = (mdp.n_states, mdp.n_actions, mdp.discount);
    let mut q = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    let mut residuals = Vec::new();
    for _ in 0..max_iterations {
        let mut change = 0.0f64;
        for s in 0..ns {
            for a in 0..na {
                let backup = reward[s] + gamma * mdp.expected_next(s, a, &v);
                change = change.max((backup - q[s * na + a]).abs());
                q[s * na + a] = backup;
            }
        }
        for s in 0..ns {
            v[s] = q[s * na..(s + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        residuals.push(change);
        if change <= tol {
            return Ok((v, QTable { n_states: ns, n_actions: na, values: q }, residuals));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Exact policy iteration: each policy is evaluated with a dense linear
/// solve, so the returned Q is accurate to rounding error.
pub fn policy_iteration(mdp: &Mdp, reward: &[f64], tol: f64) -> Result<(Vec<f64>, QTable)> {
    check_reward(mdp, reward)?;
    check_tol(tol)?;
    let (ns, na, gamma) = (mdp.n_states, mdp.n_actions, mdp.discount);
    let mut policy = vec![0usize; ns];
    // seed with the one-step greedy policy
    for s in 0..ns {
        let row: Vec<f64> = (0..na).map(|a| mdp.expected_next(s, a, reward)).collect();
        policy[s] = argmax_lowest(&row);
    }
    for _ in 0..DEFAULT_MAX_ITERATIONS {
        let v = solve_discounted(mdp, &policy, reward);
        let mut q = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                q[s * na + a] = reward[s] + gamma * mdp.expected_next(s, a, &v);
            }
        }
        let mut changed = false;
        for s in 0..ns {
            let row = &q[s * na..(s + 1) * na];
            let best = argmax_lowest(row);
            let margin = 1e-12 * (1.0 + row[best].abs());
            if row[best] > row[policy[s]] + margin {
                policy[s] = best;
                changed = true;
            }
        }
        if !changed {
            let table = QTable { n_states: ns, n_actions: na, values: q };
            let v = table.state_values();
            return Ok((v, table));
        }
    }
    Err(Error::NotConverged { iterations: DEFAULT_MAX_ITERATIONS, residual: f64::NAN })
}

/// Optimal values with the planner suited to the MDP size: exact policy
/// iteration for small state spaces, value iteration otherwise.
pub fn solve_optimal(mdp: &Mdp, reward: &[f64], tol: f64) -> Result<(Vec<f64>, QTable)> {
    if mdp.n_states <= DIRECT_SOLVE_MAX_STATES {
        policy_iteration(mdp, reward, tol)
    } else {
        value_iteration(mdp, reward, tol)
    }
}

fn solve_discounted(mdp: &Mdp, policy: &[usize], reward: &[f64]) -> Vec<f64> {
    let ns = mdp.n_states;
    let mut m = DMatrix::<f64>::identity(ns, ns);
    for s in 0..ns {
        for &(t, p) in mdp.successors(s, policy[s]) {
            m[(s, t)] -= mdp.discount * p;
        }
    }
    let rhs = DVector::from_column_slice(reward);
    let sol = m.lu().solve(&rhs).expect("I - gamma P is nonsingular for gamma < 1");
    sol.iter().copied().collect()
}

/// Reward `C` at `goal`, zero elsewhere.
pub fn subgoal_reward(n_states: usize, goal: usize, reward_mass: f64) -> Vec<f64> {
    let mut r = vec![0.0; n_states];
    r[goal] = reward_mass;
    r
}

/// Optimal Q for the point-mass reward `C` at `goal`.
///
/// Q is linear in the reward, so the table is planned once for unit mass
/// and scaled by `C`.
pub fn subgoal_q(mdp: &Mdp, goal: usize, reward_mass: f64, tol: f64) -> Result<QTable> {
    mdp.check_state(goal)?;
    if !(reward_mass >= 0.0) || !reward_mass.is_finite() {
        return Err(Error::InvalidArgument(format!("reward mass must be finite and >= 0, got {reward_mass}")));
    }
    let (_, q) = solve_optimal(mdp, &subgoal_reward(mdp.n_states, goal, 1.0), tol)?;
    Ok(q.scaled(reward_mass))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_policy(q: &QTable) -> Vec<usize> {
    q.rows().map(argmax_lowest).collect()
}

/// How `policy_evaluation` accumulates reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// `V = R + gamma P V`.
    Discounted,
    /// `target` is made absorbing with zero value and rewards are summed
    /// without discounting until it is reached.
    UndiscountedAbsorbing { target: usize },
}

/// Value of a fixed deterministic policy.
///
/// In the absorbing case, states that do not reach the target with
/// probability one have divergent value, reported as `-inf` (or `+inf`)
/// according to the sign of the reward outside the target.
pub fn policy_evaluation(mdp: &Mdp, policy: &[usize], reward: &[f64], tol: f64, horizon: Horizon) -> Result<Vec<f64>> {
    check_reward(mdp, reward)?;
    check_tol(tol)?;
    if policy.len() != mdp.n_states || policy.iter().any(|&a| a >= mdp.n_actions) {
        return Err(Error::InvalidArgument("policy must hold one valid action per state".into()));
    }
    match horizon {
        Horizon::Discounted => {
            if mdp.n_states <= DIRECT_SOLVE_MAX_STATES {
                Ok(solve_discounted(mdp, policy, reward))
            } else {
                iterate_evaluation(mdp, policy, reward, mdp.discount, None, &vec![true; mdp.n_states], tol)
            }
        }
        Horizon::UndiscountedAbsorbing { target } => {
            mdp.check_state(target)?;
            evaluate_absorbing(mdp, policy, reward, target, tol)
        }
    }
}

fn evaluate_absorbing(mdp: &Mdp, policy: &[usize], reward: &[f64], target: usize, tol: f64) -> Result<Vec<f64>> {
    let ns = mdp.n_states;
    let absorbed = almost_surely_absorbed(mdp, policy, target);
    let outside: Vec<f64> = (0..ns).filter(|&s| s != target).map(|s| reward[s]).collect();
    let divergent_value = if outside.iter().all(|r| *r < 0.0) {
        f64::NEG_INFINITY
    } else if outside.iter().all(|r| *r > 0.0) {
        f64::INFINITY
    } else if absorbed.iter().all(|x| *x) {
        0.0 // never used
    } else {
        return Err(Error::NotConverged { iterations: 0, residual: f64::INFINITY });
    };

    let mut values = if ns <= DIRECT_SOLVE_MAX_STATES {
        solve_absorbing_direct(mdp, policy, reward, target, &absorbed)
    } else {
        iterate_evaluation(mdp, policy, reward, 1.0, Some(target), &absorbed, tol)?
    };
    for s in 0..ns {
        if !absorbed[s] {
            values[s] = divergent_value;
        }
    }
    values[target] = 0.0;
    Ok(values)
}

/// States from which the target is reached with probability one under
/// `policy`: those with no path into the set of states that cannot reach
/// the target at all.
fn almost_surely_absorbed(mdp: &Mdp, policy: &[usize], target: usize) -> Vec<bool> {
    let ns = mdp.n_states;
    let mut predecessors = vec![Vec::new(); ns];
    for s in 0..ns {
        if s == target {
            continue;
        }
        for &(t, _) in mdp.successors(s, policy[s]) {
            predecessors[t].push(s);
        }
    }
    let backward = |seeds: &[usize]| {
        let mut seen = vec![false; ns];
        let mut queue: VecDeque<usize> = seeds.iter().copied().collect();
        for &s in seeds {
            seen[s] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &p in &predecessors[u] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen
    };
    let can_reach = backward(&[target]);
    let traps: Vec<usize> = (0..ns).filter(|&s| !can_reach[s]).collect();
    let reaches_trap = backward(&traps);
    (0..ns).map(|s| s == target || !reaches_trap[s]).collect()
}

fn solve_absorbing_direct(mdp: &Mdp, policy: &[usize], reward: &[f64], target: usize, absorbed: &[bool]) -> Vec<f64> {
    let ns = mdp.n_states;
    let index: Vec<Option<usize>> = {
        let mut next = 0;
        (0..ns)
            .map(|s| {
                if absorbed[s] && s != target {
                    next += 1;
                    Some(next - 1)
                } else {
                    None
                }
            })
            .collect()
    };
    let m = index.iter().flatten().count();
    let mut values = vec![0.0; ns];
    if m == 0 {
        return values;
    }
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for s in 0..ns {
        let Some(i) = index[s] else { continue };
        b[i] = reward[s];
        for &(t, p) in mdp.successors(s, policy[s]) {
            if let Some(j) = index[t] {
                a[(i, j)] -= p;
            }
        }
    }
    let sol = a.lu().solve(&b).expect("transient block of an absorbing chain is nonsingular");
    for s in 0..ns {
        if let Some(i) = index[s] {
            values[s] = sol[i];
        }
    }
    values
}

fn iterate_evaluation(
    mdp: &Mdp,
    policy: &[usize],
    reward: &[f64],
    gamma: f64,
    target: Option<usize>,
    active: &[bool],
    tol: f64,
) -> Result<Vec<f64>> {
    let ns = mdp.n_states;
    let mut v = vec![0.0; ns];
    let mut change = f64::INFINITY;
    // Gauss-Seidel sweeps over the active states
    for _ in 0..DEFAULT_MAX_ITERATIONS * 10 {
        change = 0.0;
        for s in 0..ns {
            if !active[s] || Some(s) == target {
                continue;
            }
            let mut next = 0.0;
            for &(t, p) in mdp.successors(s, policy[s]) {
                if active[t] && Some(t) != target {
                    next += p * v[t];
                }
            }
            let updated = reward[s] + gamma * next;
            change = change.max((updated - v[s]).abs());
            v[s] = updated;
        }
        if change <= tol * 1e-2 {
            return Ok(v);
        }
    }
    Err(Error::NotConverged { iterations: DEFAULT_MAX_ITERATIONS * 10, residual: change })
}

/// `delta[i][j]` = expected steps from `i` to `j` under `policies[j]`,
/// via undiscounted evaluation with `j` absorbing, reward `-1` elsewhere.
pub fn hitting_time_matrix(mdp: &Mdp, policies: &[Vec<usize>]) -> Result<HittingTimeMatrix> {
    let ns = mdp.n_states;
    if policies.len() != ns {
        return Err(Error::InvalidArgument(format!(
            "need one subgoal policy per state, got {} for {ns} states",
            policies.len()
        )));
    }
    let columns: Vec<Vec<f64>> = policies
        .par_iter()
        .enumerate()
        .map(|(j, pi)| {
            let mut reward = vec![-1.0; ns];
            reward[j] = 0.0;
            let v = policy_evaluation(mdp, pi, &reward, DEFAULT_TOL, Horizon::UndiscountedAbsorbing { target: j })?;
            Ok(v.into_iter().map(|x| if x == f64::NEG_INFINITY { f64::INFINITY } else { -x }).collect())
        })
        .collect::<Result<_>>()?;
    let mut delta = vec![0.0; ns * ns];
    for (j, col) in columns.iter().enumerate() {
        for i in 0..ns {
            delta[i * ns + j] = if i == j { 0.0 } else { col[i].max(0.0) };
        }
    }
    Ok(HittingTimeMatrix { n: ns, delta })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Deterministic chain 0 -> 1 -> ... -> n-1 (absorbing) with two actions:
    /// 0 = forward, 1 = stay.
    pub(crate) fn chain(n: usize, discount: f64) -> Mdp {
        let mut t = vec![0.0; n * 2 * n];
        for s in 0..n {
            let fwd = (s + 1).min(n - 1);
            t[(s * 2) * n + fwd] = 1.0;
            t[(s * 2 + 1) * n + s] = 1.0;
        }
        Mdp::new(n, 2, discount, t).unwrap()
    }

    #[test]
    fn single_state_geometric_series() {
        let mdp = Mdp::new(1, 1, 0.9, vec![1.0]).unwrap();
        let (v, q) = value_iteration(&mdp, &[1.0], 1e-10).unwrap();
        assert_abs_diff_eq!(v[0], 10.0, epsilon = 1e-8);
        assert_abs_diff_eq!(q.get(0, 0), 10.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_reward_gives_zero_values() {
        let mdp = chain(5, 0.9);
        let (v, q) = value_iteration(&mdp, &[0.0; 5], 1e-8).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
        assert!(q.values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn two_state_chain_closed_form() {
        let mdp = chain(2, 0.9);
        let (v, _) = value_iteration(&mdp, &[0.0, 1.0], 1e-10).unwrap();
        assert_abs_diff_eq!(v[0], 9.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v[1], 10.0, epsilon = 1e-8);
        let (v_pi, _) = policy_iteration(&mdp, &[0.0, 1.0], 1e-10).unwrap();
        assert_abs_diff_eq!(v_pi[0], 9.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mdp = chain(3, 0.9);
        assert!(value_iteration(&mdp, &[0.0, f64::NAN, 0.0], 1e-8).is_err());
        assert!(value_iteration(&mdp, &[0.0; 3], 0.0).is_err());
        assert!(subgoal_q(&mdp, 3, 1.0, 1e-8).is_err());
        assert!(Mdp::new(1, 1, 1.0, vec![1.0]).is_err());
        assert!(Mdp::new(1, 1, 0.5, vec![0.5]).is_err());
    }

    #[test]
    fn subgoal_q_one_step_reach() {
        let mdp = chain(2, 0.9);
        let q = subgoal_q(&mdp, 1, 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(q.get(0, 0), 9.0, epsilon = 1e-9);
        let zero = subgoal_q(&mdp, 1, 0.0, 1e-10).unwrap();
        assert!(zero.values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn greedy_tie_rules() {
        let q = QTable::new(3, 3, vec![0.0, 5.0, 3.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0]).unwrap();
        assert_eq!(greedy_policy(&q), vec![1, 0, 0]);
    }

    #[test]
    fn absorbing_one_step_costs_minus_one() {
        let mdp = chain(2, 0.9);
        let v = policy_evaluation(&mdp, &[0, 0], &[-1.0, 0.0], 1e-10, Horizon::UndiscountedAbsorbing { target: 1 })
            .unwrap();
        assert_abs_diff_eq!(v[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluation_of_greedy_matches_value_iteration() {
        let mdp = chain(6, 0.8);
        let reward = [0.0, 0.5, 0.0, 0.0, 0.2, 1.0];
        let tol = 1e-9;
        let (v, q) = value_iteration(&mdp, &reward, tol).unwrap();
        let v_pi = policy_evaluation(&mdp, &greedy_policy(&q), &reward, tol, Horizon::Discounted).unwrap();
        for (a, b) in v.iter().zip(&v_pi) {
            // value iteration stops within tol/(1-gamma) of the fixed point
            assert!((a - b).abs() <= 2.0 * tol / (1.0 - mdp.discount()));
        }
    }

    fn lazy_two_state(p: f64) -> Mdp {
        // action 0 moves 0 -> 1 with probability p, else stays
        Mdp::new(2, 1, 0.9, vec![1.0 - p, p, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn geometric_hitting_time() {
        let mdp = lazy_two_state(0.5);
        let v = policy_evaluation(&mdp, &[0, 0], &[-1.0, 0.0], 1e-10, Horizon::UndiscountedAbsorbing { target: 1 })
            .unwrap();
        assert_abs_diff_eq!(v[0], -2.0, epsilon = 1e-10);
        let h = hitting_time_matrix(&mdp, &[vec![0, 0], vec![0, 0]]).unwrap();
        assert_abs_diff_eq!(h.get(0, 1), 2.0, epsilon = 1e-10);
        assert_eq!(h.get(1, 0), f64::INFINITY);
        assert_eq!(h.get(0, 0), 0.0);
        assert_eq!(h.get(1, 1), 0.0);
    }

    #[test]
    fn one_step_neighbor_hitting_time() {
        let mdp = chain(3, 0.9);
        let policies: Vec<Vec<usize>> = (0..3).map(|_| vec![0, 0, 0]).collect();
        let h = hitting_time_matrix(&mdp, &policies).unwrap();
        assert_abs_diff_eq!(h.get(0, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.get(0, 2), 2.0, epsilon = 1e-12);
        assert_eq!(h.get(2, 0), f64::INFINITY);
    }

    #[test]
    fn iterative_and_direct_evaluation_agree() {
        let mdp = lazy_two_state(0.3);
        let direct = solve_absorbing_direct(&mdp, &[0, 0], &[-1.0, 0.0], 1, &[true, true]);
        let iterative = iterate_evaluation(&mdp, &[0, 0], &[-1.0, 0.0], 1.0, Some(1), &[true, true], 1e-12).unwrap();
        assert_abs_diff_eq!(direct[0], iterative[0], epsilon = 1e-9);
        let d = solve_discounted(&mdp, &[0, 0], &[1.0, 2.0]);
        let it = iterate_evaluation(&mdp, &[0, 0], &[1.0, 2.0], 0.9, None, &[true, true], 1e-12).unwrap();
        assert_abs_diff_eq!(d[0], it[0], epsilon = 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let mdp = chain(3, 0.5);
        let back: Mdp = serde_json::from_str(&mdp.to_json()).unwrap();
        assert_eq!(mdp, back);
        let bad = r#"{"n_states":1,"n_actions":1,"discount":0.5,"transition":[[[0.4]]]}"#;
        assert!(serde_json::from_str::<Mdp>(bad).is_err());
    }
}
