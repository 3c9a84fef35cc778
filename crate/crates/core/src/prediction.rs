//! Posterior predictive action distributions, MAP policies, entropy maps
//! and per-cluster subgoal reports.

use serde::{Deserialize, Serialize};

use crate::demos::DemoSet;
use crate::error::{Error, Result};
use crate::likelihood::{map_subgoal, posterior_from_stats, LikelihoodCache};
use crate::mdp::argmax_lowest;
use crate::numeric::entropy;
use crate::samplers::{cluster_goal_stats, nearest_demo, sample_pairs, ModelKind, PartitionSample, PosteriorBundle};

/// Per-goal action model mixed into the predictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    /// The subgoal likelihood `pi(a | s, g)` itself.
    #[default]
    Softmax,
    /// Indicator of the greedy subgoal policy.
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
    n_samples: usize,
}

impl PredictiveDistribution {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>, n_samples: usize) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::InvalidArgument(format!(
                "predictive has {} entries, expected {n_states} x {n_actions}",
                probs.len()
            )));
        }
        Ok(PredictiveDistribution { n_states, n_actions, probs, n_samples })
    }

    /// Uniform rows, e.g. before any demonstration arrived.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        PredictiveDistribution { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions], n_samples: 0 }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.n_actions)
    }
}

/// Predictive rows of every state for one subgoal posterior.
fn mix_goal_rows(cache: &LikelihoodCache, posterior: &[f64], mode: PolicyMode, states: &[usize], out: &mut [f64], weight: f64) {
    let na = cache.n_actions();
    for (gi, &pg) in posterior.iter().enumerate() {
        let w = weight * pg;
        if w == 0.0 {
            continue;
        }
        for (k, &s) in states.iter().enumerate() {
            let row = &mut out[k * na..(k + 1) * na];
            match mode {
                PolicyMode::Softmax => {
                    for (o, lp) in row.iter_mut().zip(cache.log_pi_row(gi, s)) {
                        *o += w * lp.exp();
                    }
                }
                PolicyMode::Optimal => row[cache.policy(gi)[s]] += w,
            }
        }
    }
}

/// Subgoal posterior of every cluster in a sample.
pub fn cluster_posteriors(
    bundle: &PosteriorBundle,
    cache: &LikelihoodCache,
    demos: &DemoSet,
    sample: &PartitionSample,
) -> Result<Vec<Vec<f64>>> {
    let pairs = sample_pairs(demos, sample)?;
    let stats = match bundle.model {
        ModelKind::Spatial => cluster_goal_stats(cache, &sample.cluster_of, |d| pairs[d].0, &pairs),
        ModelKind::Temporal | ModelKind::Bnirl => cluster_goal_stats(cache, &sample.cluster_of, |d| d, &pairs),
    };
    stats.iter().map(|st| posterior_from_stats(cache.prior(), st)).collect()
}

/// Cluster index used for query state `s`: the state's own cluster in the
/// spatial model, otherwise the cluster of the nearest demonstration in
/// hitting time. `None` when there is no demonstration to anchor to.
fn query_cluster(bundle: &PosteriorBundle, cache: &LikelihoodCache, demo_states: &[usize], sample: &PartitionSample, s: usize) -> Result<Option<usize>> {
    Ok(match bundle.model {
        ModelKind::Spatial => Some(sample.cluster_of[s]),
        _ if demo_states.is_empty() => None,
        _ => Some(sample.cluster_of[nearest_demo(cache.hitting_times()?, s, demo_states)]),
    })
}

fn check_bundle(bundle: &PosteriorBundle, cache: &LikelihoodCache, demos: &DemoSet) -> Result<()> {
    let expected = match bundle.model {
        ModelKind::Spatial => cache.n_states(),
        _ => demos.len(),
    };
    if bundle.n_nodes != expected {
        return Err(Error::InvalidArgument(format!(
            "bundle has {} nodes but the data implies {expected}",
            bundle.n_nodes
        )));
    }
    Ok(())
}

/// Monte Carlo posterior predictive `p(a* | s*, D)` averaged over retained
/// samples (the cold chain when it ran).
pub fn predictive_distribution(
    bundle: &PosteriorBundle,
    cache: &LikelihoodCache,
    demos: &DemoSet,
    mode: PolicyMode,
) -> Result<PredictiveDistribution> {
    check_bundle(bundle, cache, demos)?;
    let samples = bundle.prediction_samples();
    if samples.is_empty() {
        return Err(Error::InvalidArgument("bundle holds no samples".into()));
    }
    if bundle.cold_samples.is_empty() {
        log::warn!("no cold-chain samples; predicting from annealed samples, which are biased toward the MAP");
    }
    let (ns, na) = (cache.n_states(), cache.n_actions());
    let demo_states = demos.states();
    let mut probs = vec![0.0; ns * na];
    let weight = 1.0 / samples.len() as f64;
    let prior_weights: Vec<f64> = cache.prior().log_weights().iter().map(|w| w.exp()).collect();
    let mut states_of_cluster: Vec<Vec<usize>> = Vec::new();
    let mut scratch = Vec::new();
    for sample in samples {
        let posteriors = cluster_posteriors(bundle, cache, demos, sample)?;
        states_of_cluster.clear();
        states_of_cluster.resize(posteriors.len() + 1, Vec::new());
        for s in 0..ns {
            let k = query_cluster(bundle, cache, &demo_states, sample, s)?.unwrap_or(posteriors.len());
            states_of_cluster[k].push(s);
        }
        for (k, states) in states_of_cluster.iter().enumerate() {
            if states.is_empty() {
                continue;
            }
            let posterior = posteriors.get(k).unwrap_or(&prior_weights);
            scratch.clear();
            scratch.resize(states.len() * na, 0.0);
            mix_goal_rows(cache, posterior, mode, states, &mut scratch, weight);
            for (i, &s) in states.iter().enumerate() {
                for a in 0..na {
                    probs[s * na + a] += scratch[i * na + a];
                }
            }
        }
    }
    for row in probs.chunks_mut(na) {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
    }
    PredictiveDistribution::new(ns, na, probs, samples.len())
}

/// Frequency-only predictive of the exchangeable model: a new datum joins
/// cluster `j` with probability `n_j / (D + alpha)` or a fresh cluster with
/// `alpha / (D + alpha)`, whatever its state. Kept as a diagnostic of that
/// model's inability to localize subgoals.
pub fn crp_frequency_predictive(
    bundle: &PosteriorBundle,
    cache: &LikelihoodCache,
    demos: &DemoSet,
    alpha: f64,
    mode: PolicyMode,
) -> Result<PredictiveDistribution> {
    if bundle.model != ModelKind::Bnirl {
        return Err(Error::InvalidArgument("frequency predictive applies to CRP bundles only".into()));
    }
    check_bundle(bundle, cache, demos)?;
    let samples = bundle.prediction_samples();
    if samples.is_empty() {
        return Err(Error::InvalidArgument("bundle holds no samples".into()));
    }
    let (ns, na) = (cache.n_states(), cache.n_actions());
    let all: Vec<usize> = (0..ns).collect();
    let prior_weights: Vec<f64> = cache.prior().log_weights().iter().map(|w| w.exp()).collect();
    let mut probs = vec![0.0; ns * na];
    let d = demos.len() as f64;
    for sample in samples {
        let posteriors = cluster_posteriors(bundle, cache, demos, sample)?;
        let mut sizes = vec![0usize; posteriors.len()];
        for &k in &sample.cluster_of {
            sizes[k] += 1;
        }
        let w = 1.0 / samples.len() as f64;
        for (post, &n) in posteriors.iter().zip(&sizes) {
            mix_goal_rows(cache, post, mode, &all, &mut probs, w * n as f64 / (d + alpha));
        }
        if alpha > 0.0 {
            mix_goal_rows(cache, &prior_weights, mode, &all, &mut probs, w * alpha / (d + alpha));
        }
    }
    for row in probs.chunks_mut(na) {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
    }
    PredictiveDistribution::new(ns, na, probs, samples.len())
}

/// Argmax action per state, lowest index on ties.
pub fn map_policy(pred: &PredictiveDistribution) -> Vec<usize> {
    pred.rows().map(argmax_lowest).collect()
}

/// Prediction entropy per state in nats.
pub fn entropy_map(pred: &PredictiveDistribution) -> Vec<f64> {
    pred.rows().map(entropy).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub label: usize,
    /// Member nodes: states for the spatial model, demonstrations otherwise.
    pub members: Vec<usize>,
    pub posterior: Vec<f64>,
    pub map_subgoal: usize,
}

/// Members, subgoal posterior and MAP subgoal of every cluster in
/// annealed sample `sample_index`.
pub fn report_subgoals(
    bundle: &PosteriorBundle,
    cache: &LikelihoodCache,
    demos: &DemoSet,
    sample_index: usize,
) -> Result<Vec<ClusterReport>> {
    let sample = bundle
        .samples
        .get(sample_index)
        .ok_or_else(|| Error::InvalidArgument(format!("sample {sample_index} out of range ({} samples)", bundle.samples.len())))?;
    report_sample(bundle, cache, demos, sample)
}

pub fn report_sample(
    bundle: &PosteriorBundle,
    cache: &LikelihoodCache,
    demos: &DemoSet,
    sample: &PartitionSample,
) -> Result<Vec<ClusterReport>> {
    check_bundle(bundle, cache, demos)?;
    let posteriors = cluster_posteriors(bundle, cache, demos, sample)?;
    let mut members = vec![Vec::new(); posteriors.len()];
    for (node, &k) in sample.cluster_of.iter().enumerate() {
        members[k].push(node);
    }
    Ok(posteriors
        .into_iter()
        .zip(members)
        .enumerate()
        .map(|(label, (posterior, members))| {
            let map_subgoal = map_subgoal(&posterior, cache.prior());
            ClusterReport { label, members, posterior, map_subgoal }
        })
        .collect())
}

/// Predictive of each cluster of one sample applied to every state: the
/// per-phase policies of the temporal model.
pub fn cluster_predictives(
    bundle: &PosteriorBundle,
    cache: &LikelihoodCache,
    demos: &DemoSet,
    sample: &PartitionSample,
    mode: PolicyMode,
) -> Result<Vec<PredictiveDistribution>> {
    check_bundle(bundle, cache, demos)?;
    let (ns, na) = (cache.n_states(), cache.n_actions());
    let all: Vec<usize> = (0..ns).collect();
    cluster_posteriors(bundle, cache, demos, sample)?
        .iter()
        .map(|post| {
            let mut probs = vec![0.0; ns * na];
            mix_goal_rows(cache, post, mode, &all, &mut probs, 1.0);
            for row in probs.chunks_mut(na) {
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= total);
            }
            PredictiveDistribution::new(ns, na, probs, 1)
        })
        .collect()
}
