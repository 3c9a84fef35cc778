//! Random MDPs with sparse Dirichlet dynamics and a noisy expert.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::bench::gridworld::sample_successor;
use crate::demos::{DemoRecord, DemoSet};
use crate::error::{Error, Result};
use crate::mdp::{self, greedy_policy, Horizon, Mdp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub concentration: f64,
    pub n_reward_states: usize,
    pub discount: f64,
}

impl Default for RandomMdpSpec {
    fn default() -> Self {
        RandomMdpSpec { n_states: 100, n_actions: 10, concentration: 0.01, n_reward_states: 10, discount: 0.9 }
    }
}

#[derive(Debug, Clone)]
pub struct RandomMdp {
    pub mdp: Mdp,
    pub reward: Vec<f64>,
    pub optimal_policy: Vec<usize>,
}

/// Symmetric Dirichlet draw computed in log space, so tiny concentrations
/// do not underflow every component at once.
pub fn sample_dirichlet<R: Rng + ?Sized>(n: usize, concentration: f64, rng: &mut R) -> Vec<f64> {
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    let boosted = Gamma::new(concentration + 1.0, 1.0).expect("positive shape");
    let logs: Vec<f64> =
        (0..n).map(|_| boosted.sample(rng).ln() + rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / concentration).collect();
    crate::numeric::normalize_log(&logs)
}

pub fn make_random_mdp<R: Rng + ?Sized>(spec: &RandomMdpSpec, rng: &mut R) -> Result<RandomMdp> {
    if spec.n_reward_states > spec.n_states {
        return Err(Error::InvalidArgument(format!(
            "cannot reward {} of {} states",
            spec.n_reward_states, spec.n_states
        )));
    }
    if !(spec.concentration > 0.0) {
        return Err(Error::InvalidArgument("Dirichlet concentration must be positive".into()));
    }
    let (ns, na) = (spec.n_states, spec.n_actions);
    let mut transition = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        transition.extend(sample_dirichlet(ns, spec.concentration, rng));
    }
    let mdp = Mdp::new(ns, na, spec.discount, transition)?;
    let mut reward = vec![0.0; ns];
    for s in sample(rng, ns, spec.n_reward_states) {
        reward[s] = rng.gen::<f64>();
    }
    let (_, q) = mdp::solve_optimal(&mdp, &reward, mdp::DEFAULT_TOL)?;
    Ok(RandomMdp { optimal_policy: greedy_policy(&q), mdp, reward })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertSpec {
    pub optimal_prob: f64,
    pub trajectory_length: usize,
    pub n_trajectories: usize,
}

impl Default for ExpertSpec {
    fn default() -> Self {
        ExpertSpec { optimal_prob: 0.9, trajectory_length: 10, n_trajectories: 10 }
    }
}

/// Optimal action with probability `optimal_prob`, otherwise a uniformly
/// drawn different action.
pub fn expert_action<R: Rng + ?Sized>(policy: &[usize], n_actions: usize, s: usize, optimal_prob: f64, rng: &mut R) -> usize {
    let best = policy[s];
    if n_actions == 1 || rng.gen::<f64>() < optimal_prob {
        return best;
    }
    let k = rng.gen_range(0..n_actions - 1);
    if k >= best {
        k + 1
    } else {
        k
    }
}

/// State-successor demonstrations with the hidden actions kept aside.
#[derive(Debug, Clone)]
pub struct ExpertDemos {
    pub demos: DemoSet,
    pub true_actions: Vec<usize>,
}

pub fn simulate_expert<R: Rng + ?Sized>(mdp: &Mdp, policy: &[usize], expert: &ExpertSpec, rng: &mut R) -> Result<ExpertDemos> {
    let mut records = Vec::new();
    let mut true_actions = Vec::new();
    for traj in 0..expert.n_trajectories {
        let mut s = rng.gen_range(0..mdp.n_states());
        for t in 0..expert.trajectory_length {
            let a = expert_action(policy, mdp.n_actions(), s, expert.optimal_prob, rng);
            let next = sample_successor(mdp, s, a, rng);
            records.push(DemoRecord::state_successor(traj, s, next).at(t as f64));
            true_actions.push(a);
            s = next;
        }
    }
    Ok(ExpertDemos { demos: DemoSet::new(records)?, true_actions })
}

/// Discounted state values of a policy under the state reward.
pub fn policy_values(mdp: &Mdp, policy: &[usize], reward: &[f64]) -> Result<Vec<f64>> {
    mdp::policy_evaluation(mdp, policy, reward, mdp::DEFAULT_TOL, Horizon::Discounted)
}
