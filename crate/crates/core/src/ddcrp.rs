//! Distance-dependent CRP prior over link graphs and the cached-likelihood
//! Gibbs sweep over links.
//!
//! Every node carries one outgoing link; clusters are the weakly connected
//! components of the resulting functional graph. Cluster likelihoods are
//! cached per component and updated incrementally when a link is removed
//! (possible split) or re-inserted (possible merge).

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{logsumexp, quantile, sample_log_categorical};

pub const DEFAULT_KAPPA: f64 = 0.05;
pub const DEFAULT_SELF_LINK: f64 = 1.0;
pub const DEFAULT_SCALE_QUANTILE: f64 = 0.5;

/// Exponential-decay score `f(d) = (1 - kappa) exp(-d / scale) + kappa`
/// with self-link weight `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub scale: f64,
    pub kappa: f64,
    pub self_link: f64,
}

impl ScoreConfig {
    pub fn new(scale: f64, kappa: f64, self_link: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!("score scale must be positive, got {scale}")));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidArgument(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        if !(self_link >= 0.0) || !self_link.is_finite() {
            return Err(Error::InvalidArgument(format!("self-link weight must be finite and >= 0, got {self_link}")));
        }
        Ok(ScoreConfig { scale, kappa, self_link })
    }

    pub fn score(&self, distance: f64) -> f64 {
        if distance == f64::INFINITY {
            return self.kappa;
        }
        (1.0 - self.kappa) * (-distance / self.scale).exp() + self.kappa
    }
}

/// Unnormalized log link scores; rows are normalized inside the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    log_scores: Vec<f64>,
    row_norm: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_log_scores(n: usize, log_scores: Vec<f64>) -> Result<Self> {
        if log_scores.len() != n * n {
            return Err(Error::InvalidArgument("score matrix must be square".into()));
        }
        let row_norm: Vec<f64> = log_scores.chunks_exact(n.max(1)).map(logsumexp).collect();
        if let Some(i) = row_norm.iter().position(|z| *z == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument(format!("node {i} has no admissible link")));
        }
        Ok(ScoreMatrix { n, log_scores, row_norm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.log_scores[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.log_scores[i * self.n..(i + 1) * self.n]
    }

    /// `log p(c_i = j)` under the row-normalized prior.
    pub fn log_prior(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) - self.row_norm[i]
    }
}

/// Off-diagonal `log f(d_ij)`, diagonal `log nu`.
pub fn score_matrix(distances: &[f64], n: usize, config: &ScoreConfig) -> Result<ScoreMatrix> {
    if distances.len() != n * n {
        return Err(Error::InvalidArgument("distance matrix must be square".into()));
    }
    if let Some(d) = distances.iter().find(|d| d.is_nan() || **d < 0.0) {
        return Err(Error::InvalidArgument(format!("negative or NaN distance {d}")));
    }
    let mut log_scores = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            log_scores.push(if i == j { config.self_link.ln() } else { config.score(distances[i * n + j]).ln() });
        }
    }
    ScoreMatrix::from_log_scores(n, log_scores)
}

/// Quantile of the finite off-diagonal distances.
pub fn calibrate_scale(distances: &[f64], n: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile must lie in (0, 1), got {q}")));
    }
    let mut finite: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| distances[i * n + j])
        .filter(|d| d.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::InvalidArgument("no finite off-diagonal distances to calibrate on".into()));
    }
    Ok(quantile(&mut finite, q))
}

/// Weakly connected components of the functional graph `i -> links[i]`.
/// Cluster ids follow the order of each cluster's smallest member.
pub fn clusters_from_links(links: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = links.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, &j) in links.iter().enumerate() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut cluster_of = vec![0; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = members.len();
            members.push(Vec::new());
        }
        cluster_of[i] = label_of_root[r];
        members[label_of_root[r]].push(i);
    }
    (cluster_of, members)
}

/// Marginal likelihood of the data attached to a set of nodes, expressed
/// through additive per-node statistics so merges are cheap.
pub trait LikelihoodEvaluator {
    type Stats: Clone;

    fn empty_stats(&self) -> Self::Stats;

    fn add_node(&self, stats: &mut Self::Stats, node: usize);

    fn combine(&self, into: &mut Self::Stats, other: &Self::Stats);

    /// Number of data points attached to `node`.
    fn node_data_count(&self, node: usize) -> usize;

    /// Log marginal likelihood of a cluster holding at least one data point.
    fn log_marginal(&self, stats: &Self::Stats) -> f64;

    /// Log marginal likelihood of an arbitrary member set (0 when it holds no data).
    fn cluster_log_marginal(&self, members: &[usize]) -> f64 {
        let mut stats = self.empty_stats();
        let mut count = 0;
        for &m in members {
            let c = self.node_data_count(m);
            if c > 0 {
                self.add_node(&mut stats, m);
                count += c;
            }
        }
        if count == 0 {
            0.0
        } else {
            self.log_marginal(&stats)
        }
    }
}

/// Likelihood that ignores the data; the chain then samples the prior.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantEvaluator;

impl LikelihoodEvaluator for ConstantEvaluator {
    type Stats = ();

    fn empty_stats(&self) {}

    fn add_node(&self, _: &mut (), _: usize) {}

    fn combine(&self, _: &mut (), _: &()) {}

    fn node_data_count(&self, _: usize) -> usize {
        0
    }

    fn log_marginal(&self, _: &()) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
struct Cluster<S> {
    members: Vec<usize>,
    stats: S,
    n_data: usize,
    log_like: f64,
}

/// Link variables plus the induced clusters and their cached likelihoods.
#[derive(Debug, Clone)]
pub struct PartitionState<S> {
    links: Vec<usize>,
    incoming: Vec<Vec<usize>>,
    cluster_of: Vec<usize>,
    clusters: Vec<Option<Cluster<S>>>,
    free: Vec<usize>,
    mark: Vec<u64>,
    mark_generation: u64,
}

/// Node visiting order inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepOrder {
    #[default]
    Ascending,
    Random,
}

impl<S: Clone> PartitionState<S> {
    pub fn new<E: LikelihoodEvaluator<Stats = S>>(links: Vec<usize>, evaluator: &E) -> Result<Self> {
        let n = links.len();
        if let Some(&bad) = links.iter().find(|&&j| j >= n) {
            return Err(Error::InvalidArgument(format!("link target {bad} out of range for {n} nodes")));
        }
        let mut incoming = vec![Vec::new(); n];
        for (i, &j) in links.iter().enumerate() {
            if i != j {
                incoming[j].push(i);
            }
        }
        let (cluster_of, members) = clusters_from_links(&links);
        let clusters = members.into_iter().map(|m| Some(build_cluster(m, evaluator))).collect();
        Ok(PartitionState { links, incoming, cluster_of, clusters, free: Vec::new(), mark: vec![0; n], mark_generation: 0 })
    }

    /// Every node linked to itself.
    pub fn self_links<E: LikelihoodEvaluator<Stats = S>>(n: usize, evaluator: &E) -> Self {
        Self::new((0..n).collect(), evaluator).expect("self links are valid")
    }

    /// Node `i` linked to `i + 1`, forming one cluster.
    pub fn single_cluster<E: LikelihoodEvaluator<Stats = S>>(n: usize, evaluator: &E) -> Self {
        Self::new((0..n).map(|i| (i + 1).min(n.saturating_sub(1))).collect(), evaluator).expect("valid chain")
    }

    pub fn n_nodes(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[usize] {
        &self.links
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len() - self.free.len()
    }

    /// Canonical labels: cluster ids in order of smallest member.
    pub fn labels(&self) -> Vec<usize> {
        clusters_from_links(&self.links).0
    }

    /// Canonical member lists, each sorted ascending.
    pub fn cluster_members(&self) -> Vec<Vec<usize>> {
        clusters_from_links(&self.links).1
    }

    /// Cached log likelihood of the cluster containing `node`.
    pub fn cached_log_like_of(&self, node: usize) -> f64 {
        self.cluster(self.cluster_of[node]).log_like
    }

    /// Sum of cached cluster log likelihoods.
    pub fn total_log_like(&self) -> f64 {
        self.clusters.iter().flatten().map(|c| c.log_like).sum()
    }

    /// `log p(c) + sum_k log L(C_k)` with the row-normalized link prior.
    pub fn log_joint(&self, scores: &ScoreMatrix) -> f64 {
        let prior: f64 = self.links.iter().enumerate().map(|(i, &j)| scores.log_prior(i, j)).sum();
        prior + self.total_log_like()
    }

    /// Recomputes every cluster's statistics, e.g. after the data changed.
    pub fn refresh<E: LikelihoodEvaluator<Stats = S>>(&mut self, evaluator: &E) {
        for slot in self.clusters.iter_mut().flatten() {
            let members = std::mem::take(&mut slot.members);
            *slot = build_cluster(members, evaluator);
        }
    }

    /// Checks the structural invariants and cache coherence.
    pub fn check_invariants<E: LikelihoodEvaluator<Stats = S>>(&self, evaluator: &E, tol: f64) -> std::result::Result<(), String> {
        let (canon_of, canon_members) = clusters_from_links(&self.links);
        if canon_members.len() != self.n_clusters() {
            return Err(format!("{} cached clusters, {} components", self.n_clusters(), canon_members.len()));
        }
        for members in &canon_members {
            let slot = self.cluster_of[members[0]];
            let cluster = self.clusters[slot].as_ref().ok_or("node mapped to a freed cluster")?;
            let mut cached = cluster.members.clone();
            cached.sort_unstable();
            if &cached != members {
                return Err(format!("cluster {slot} members {cached:?} differ from component {members:?}"));
            }
            if members.iter().any(|&m| self.cluster_of[m] != slot) {
                return Err(format!("cluster labels disagree inside component {members:?}"));
            }
            let fresh = evaluator.cluster_log_marginal(members);
            if (fresh - cluster.log_like).abs() > tol {
                return Err(format!("cached log likelihood {} vs recomputed {fresh}", cluster.log_like));
            }
        }
        let _ = canon_of;
        for (j, inc) in self.incoming.iter().enumerate() {
            for &i in inc {
                if self.links[i] != j {
                    return Err(format!("stale incoming edge {i} -> {j}"));
                }
            }
        }
        Ok(())
    }

    fn cluster(&self, slot: usize) -> &Cluster<S> {
        self.clusters[slot].as_ref().expect("live cluster")
    }

    fn alloc(&mut self, cluster: Cluster<S>) -> usize {
        match self.free.pop() {
            Some(slot) => {
                self.clusters[slot] = Some(cluster);
                slot
            }
            None => {
                self.clusters.push(Some(cluster));
                self.clusters.len() - 1
            }
        }
    }

    /// Removes the link of `i` (replacing it by a self-link) and splits its
    /// component if the link was a bridge.
    fn detach<E: LikelihoodEvaluator<Stats = S>>(&mut self, i: usize, evaluator: &E) {
        let old = self.links[i];
        if old == i {
            return;
        }
        self.links[i] = i;
        let inc = &mut self.incoming[old];
        let pos = inc.iter().position(|&x| x == i).expect("incoming edge present");
        inc.swap_remove(pos);

        // undirected search from i, stopping early once `old` is reached
        self.mark_generation += 1;
        let generation = self.mark_generation;
        self.mark[i] = generation;
        let mut seen = vec![i];
        let mut queue = VecDeque::from([i]);
        while let Some(u) = queue.pop_front() {
            let out = self.links[u];
            for v in std::iter::once(out).chain(self.incoming[u].iter().copied()) {
                if v == old {
                    return;
                }
                if self.mark[v] != generation {
                    self.mark[v] = generation;
                    seen.push(v);
                    queue.push_back(v);
                }
            }
        }
        // split: `seen` becomes a new cluster, the rest stays behind
        let slot = self.cluster_of[i];
        let rest: Vec<usize> =
            self.cluster(slot).members.iter().copied().filter(|&m| self.mark[m] != generation).collect();
        self.clusters[slot] = Some(build_cluster(rest, evaluator));
        let new_slot = self.alloc(build_cluster(seen, evaluator));
        for &m in &self.cluster(new_slot).members.clone() {
            self.cluster_of[m] = new_slot;
        }
    }

    fn attach<E: LikelihoodEvaluator<Stats = S>>(&mut self, i: usize, j: usize, merged: Option<(S, f64)>, evaluator: &E) {
        self.links[i] = j;
        if i == j {
            return;
        }
        self.incoming[j].push(i);
        let (a, b) = (self.cluster_of[i], self.cluster_of[j]);
        if a == b {
            return;
        }
        let (keep, gone) = if self.cluster(a).members.len() >= self.cluster(b).members.len() { (a, b) } else { (b, a) };
        let gone_cluster = self.clusters[gone].take().expect("live cluster");
        self.free.push(gone);
        for &m in &gone_cluster.members {
            self.cluster_of[m] = keep;
        }
        let kept = self.clusters[keep].as_mut().expect("live cluster");
        kept.members.extend_from_slice(&gone_cluster.members);
        kept.n_data += gone_cluster.n_data;
        match merged {
            Some((stats, log_like)) => {
                kept.stats = stats;
                kept.log_like = log_like;
            }
            None => {
                evaluator.combine(&mut kept.stats, &gone_cluster.stats);
                kept.log_like = if kept.n_data == 0 { 0.0 } else { evaluator.log_marginal(&kept.stats) };
            }
        }
    }
}

fn build_cluster<S, E: LikelihoodEvaluator<Stats = S>>(members: Vec<usize>, evaluator: &E) -> Cluster<S> {
    let mut stats = evaluator.empty_stats();
    let mut n_data = 0;
    for &m in &members {
        let c = evaluator.node_data_count(m);
        if c > 0 {
            evaluator.add_node(&mut stats, m);
            n_data += c;
        }
    }
    let log_like = if n_data == 0 { 0.0 } else { evaluator.log_marginal(&stats) };
    Cluster { members, stats, n_data, log_like }
}

/// Scratch buffers reused across sweeps.
#[derive(Debug, Default)]
pub struct SweepScratch {
    log_weights: Vec<f64>,
    merge_term: Vec<f64>,
    stamp: Vec<u64>,
    generation: u64,
    order: Vec<usize>,
}

/// One systematic Gibbs pass over all links.
///
/// For each node the link is removed, then redrawn from
/// `exp((log f(i, j) + merge(i, j)) / temperature)`, where the merge term
/// is zero for self-links and same-cluster targets and
/// `log L(Ci u Cj) - log L(Ci) - log L(Cj)` otherwise.
pub fn gibbs_sweep<S, E, R>(
    state: &mut PartitionState<S>,
    scores: &ScoreMatrix,
    evaluator: &E,
    temperature: f64,
    order: SweepOrder,
    scratch: &mut SweepScratch,
    rng: &mut R,
) where
    S: Clone,
    E: LikelihoodEvaluator<Stats = S>,
    R: Rng + ?Sized,
{
    let n = state.n_nodes();
    debug_assert_eq!(scores.n(), n);
    let inv_t = 1.0 / temperature;
    scratch.order.clear();
    scratch.order.extend(0..n);
    if order == SweepOrder::Random {
        scratch.order.shuffle(rng);
    }
    scratch.log_weights.resize(n, 0.0);
    for k in 0..n {
        let i = scratch.order[k];
        state.detach(i, evaluator);

        let slots = state.clusters.len();
        scratch.merge_term.resize(slots, 0.0);
        scratch.stamp.resize(slots, 0);
        scratch.generation += 1;
        let ci = state.cluster_of[i];
        let home = state.cluster(ci);
        let home_has_data = home.n_data > 0;

        let row = scores.row(i);
        for j in 0..n {
            let cj = state.cluster_of[j];
            let mut w = row[j];
            if cj != ci && home_has_data {
                if scratch.stamp[cj] != scratch.generation {
                    scratch.stamp[cj] = scratch.generation;
                    let other = state.cluster(cj);
                    scratch.merge_term[cj] = if other.n_data == 0 {
                        0.0
                    } else {
                        let mut merged = home.stats.clone();
                        evaluator.combine(&mut merged, &other.stats);
                        evaluator.log_marginal(&merged) - home.log_like - other.log_like
                    };
                }
                w += scratch.merge_term[cj];
            }
            scratch.log_weights[j] = w * inv_t;
        }
        let j = sample_log_categorical(rng, &scratch.log_weights);
        state.attach(i, j, None, evaluator);
    }
}
