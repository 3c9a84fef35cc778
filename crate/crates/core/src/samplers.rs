//! Posterior samplers: ddBNIRL-S (per-state links), ddBNIRL-T (per-demo
//! links), vanilla BNIRL (CRP labels), the collapsed action stage for
//! state-successor data, and the BNIRL-EXT post-assignment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ddcrp::{
    self, calibrate_scale, gibbs_sweep, LikelihoodEvaluator, PartitionState, ScoreConfig, ScoreMatrix, SweepOrder,
    SweepScratch,
};
use crate::demos::{DemoKind, DemoSet, DEFAULT_TRAJECTORY_GAP_FACTOR};
use crate::error::{Error, Result};
use crate::likelihood::{log_marginal_from_stats, map_subgoal, posterior_from_stats, LikelihoodCache};
use crate::mdp::Mdp;
use crate::numeric::sample_log_categorical;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub t0: f64,
    pub t_min: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig { t0: 1.0, t_min: 0.05 }
    }
}

/// Link-prior settings; `scale: None` calibrates the decay scale to the
/// `scale_quantile` of the finite distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePrior {
    pub scale: Option<f64>,
    pub scale_quantile: f64,
    pub kappa: f64,
    pub self_link: f64,
}

impl Default for ScorePrior {
    fn default() -> Self {
        ScorePrior {
            scale: None,
            scale_quantile: ddcrp::DEFAULT_SCALE_QUANTILE,
            kappa: ddcrp::DEFAULT_KAPPA,
            self_link: ddcrp::DEFAULT_SELF_LINK,
        }
    }
}

impl ScorePrior {
    pub fn resolve(&self, distances: &[f64], n: usize) -> Result<ScoreConfig> {
        let scale = match self.scale {
            Some(s) => s,
            None if n < 2 => 1.0,
            None => {
                let s = calibrate_scale(distances, n, self.scale_quantile)?;
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            }
        };
        ScoreConfig::new(scale, self.kappa, self.self_link)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPartition {
    #[default]
    SelfLinks,
    SingleCluster,
    /// Explicit starting links (ddCRP models) or labels (BNIRL), e.g. to
    /// warm-start a refit after new data arrived.
    Given(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub anneal: AnnealConfig,
    pub run_tempered_chain: bool,
    pub run_cold_chain: bool,
    pub seed: u64,
    pub score: ScorePrior,
    pub crp_alpha: f64,
    pub order: SweepOrder,
    pub init: InitialPartition,
    pub trajectory_gap_factor: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            sweeps: 2000,
            burn_in: 500,
            thin: 5,
            anneal: AnnealConfig::default(),
            run_tempered_chain: true,
            run_cold_chain: true,
            seed: 0,
            score: ScorePrior::default(),
            crp_alpha: 1.0,
            order: SweepOrder::Ascending,
            init: InitialPartition::SelfLinks,
            trajectory_gap_factor: DEFAULT_TRAJECTORY_GAP_FACTOR,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.thin == 0 {
            return Err(Error::InvalidArgument("sweeps and thin must be positive".into()));
        }
        if self.burn_in >= self.sweeps {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be below the sweep count {}",
                self.burn_in, self.sweeps
            )));
        }
        if !(self.anneal.t_min > 0.0 && self.anneal.t_min <= self.anneal.t0) {
            return Err(Error::InvalidArgument("annealing needs 0 < t_min <= t0".into()));
        }
        if !self.run_tempered_chain && !self.run_cold_chain {
            return Err(Error::InvalidArgument("at least one chain must run".into()));
        }
        if !(self.crp_alpha >= 0.0) {
            return Err(Error::InvalidArgument("crp_alpha must be >= 0".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// Geometric schedule `max(t_min, t0 * r^k)`; the rate is chosen so the
/// floor is reached halfway through the run.
pub fn anneal_temperature(sweep: usize, config: &InferenceConfig) -> f64 {
    let AnnealConfig { t0, t_min } = config.anneal;
    if sweep >= config.sweeps {
        return t_min;
    }
    let horizon = config.sweeps.div_ceil(2).max(1) as f64;
    let rate = (t_min / t0).powf(1.0 / horizon);
    (t0 * rate.powi(sweep as i32)).max(t_min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// ddBNIRL-S: one link per state.
    Spatial,
    /// ddBNIRL-T: one link per demonstration.
    Temporal,
    /// Vanilla BNIRL: CRP labels per demonstration.
    Bnirl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSample {
    pub sweep: usize,
    pub temperature: f64,
    /// Link variables (absent for BNIRL).
    pub links: Option<Vec<usize>>,
    /// Canonical cluster label per node.
    pub cluster_of: Vec<usize>,
    pub log_joint: f64,
    /// Sampled actions per demonstration (state-successor data only).
    pub actions: Option<Vec<usize>>,
}

impl PartitionSample {
    pub fn n_clusters(&self) -> usize {
        self.cluster_of.iter().max().map_or(0, |m| m + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub cache_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorBundle {
    pub model: ModelKind,
    pub n_nodes: usize,
    pub demo_kind: DemoKind,
    /// Samples of the annealed chain.
    pub samples: Vec<PartitionSample>,
    /// Samples of the chain kept at temperature 1.
    pub cold_samples: Vec<PartitionSample>,
    pub provenance: Provenance,
}

impl PosteriorBundle {
    /// Highest-joint sample of the annealed chain (first on ties), or of the
    /// cold chain when no annealed chain ran.
    pub fn map_sample(&self) -> Option<&PartitionSample> {
        let pool = if self.samples.is_empty() { &self.cold_samples } else { &self.samples };
        pool.iter().fold(None, |best: Option<&PartitionSample>, s| match best {
            Some(b) if b.log_joint >= s.log_joint => Some(b),
            _ => Some(s),
        })
    }

    /// Samples used for prediction: the cold chain when it ran.
    pub fn prediction_samples(&self) -> &[PartitionSample] {
        if self.cold_samples.is_empty() {
            &self.samples
        } else {
            &self.cold_samples
        }
    }
}

pub fn cache_hash(cache: &LikelihoodCache) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cache.config()).expect("serializes"));
    h.update(serde_json::to_vec(cache.prior()).expect("serializes"));
    for v in cache.log_pi_table() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Demonstration likelihood attached to graph nodes: each node holds the
/// per-goal summed `log pi(a_d | s_d, g)` of its demonstrations.
#[derive(Debug, Clone)]
pub struct DemoEvaluator<'a> {
    cache: &'a LikelihoodCache,
    node_of_demo: Vec<usize>,
    demos_of_node: Vec<Vec<usize>>,
    states: Vec<usize>,
    actions: Vec<usize>,
    node_stats: Vec<f64>,
}

impl<'a> DemoEvaluator<'a> {
    pub fn new(cache: &'a LikelihoodCache, n_nodes: usize, node_of_demo: Vec<usize>, states: Vec<usize>, actions: Vec<usize>) -> Self {
        let mut demos_of_node = vec![Vec::new(); n_nodes];
        for (d, &node) in node_of_demo.iter().enumerate() {
            demos_of_node[node].push(d);
        }
        let ng = cache.n_goals();
        let mut eval = DemoEvaluator {
            cache,
            node_of_demo,
            demos_of_node,
            states,
            actions,
            node_stats: vec![0.0; n_nodes * ng],
        };
        for node in 0..n_nodes {
            eval.recompute_node(node);
        }
        eval
    }

    fn recompute_node(&mut self, node: usize) {
        let ng = self.cache.n_goals();
        let stats = &mut self.node_stats[node * ng..(node + 1) * ng];
        stats.fill(0.0);
        for &d in &self.demos_of_node[node] {
            let (s, a) = (self.states[d], self.actions[d]);
            for (g, st) in stats.iter_mut().enumerate() {
                *st += self.cache.log_pi(g, s, a);
            }
        }
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn set_action(&mut self, d: usize, a: usize) {
        if self.actions[d] != a {
            self.actions[d] = a;
            self.recompute_node(self.node_of_demo[d]);
        }
    }

    pub fn node_of_demo(&self) -> &[usize] {
        &self.node_of_demo
    }
}

impl LikelihoodEvaluator for DemoEvaluator<'_> {
    type Stats = Vec<f64>;

    fn empty_stats(&self) -> Vec<f64> {
        vec![0.0; self.cache.n_goals()]
    }

    fn add_node(&self, stats: &mut Vec<f64>, node: usize) {
        let ng = self.cache.n_goals();
        for (s, x) in stats.iter_mut().zip(&self.node_stats[node * ng..(node + 1) * ng]) {
            *s += x;
        }
    }

    fn combine(&self, into: &mut Vec<f64>, other: &Vec<f64>) {
        for (s, x) in into.iter_mut().zip(other) {
            *s += x;
        }
    }

    fn node_data_count(&self, node: usize) -> usize {
        self.demos_of_node[node].len()
    }

    fn log_marginal(&self, stats: &Vec<f64>) -> f64 {
        log_marginal_from_stats(self.cache.prior(), stats)
    }
}

/// Most likely action under the transition model alone.
fn transition_argmax(mdp: &Mdp, s: usize, next: usize) -> Result<usize> {
    let probs: Vec<f64> = (0..mdp.n_actions()).map(|a| mdp.prob(s, a, next)).collect();
    if probs.iter().all(|p| *p == 0.0) {
        return Err(Error::InvalidDemos(format!("transition {s} -> {next} is impossible under every action")));
    }
    Ok(crate::mdp::argmax_lowest(&probs))
}

/// One systematic pass of the collapsed action stage.
///
/// Each hidden action is redrawn from
/// `T(s'_d | s_d, a) * sum_g p(g) prod_{d' in cluster} pi(a_d' | s_d', g)`,
/// tempered by `1 / temperature`.
pub fn sample_actions<R: Rng + ?Sized>(
    node_labels: &[usize],
    evaluator: &mut DemoEvaluator<'_>,
    successors: &[usize],
    mdp: &Mdp,
    temperature: f64,
    rng: &mut R,
) -> Result<()> {
    let cache = evaluator.cache;
    let ng = cache.n_goals();
    let na = mdp.n_actions();
    let n_clusters = node_labels.iter().max().map_or(0, |m| m + 1);
    let mut cluster_stats = vec![0.0; n_clusters * ng];
    for d in 0..evaluator.states.len() {
        let k = node_labels[evaluator.node_of_demo[d]];
        let (s, a) = (evaluator.states[d], evaluator.actions[d]);
        for g in 0..ng {
            cluster_stats[k * ng + g] += cache.log_pi(g, s, a);
        }
    }
    let log_w = cache.prior().log_weights();
    let inv_t = 1.0 / temperature;
    let mut rest = vec![0.0; ng];
    let mut weights = vec![f64::NEG_INFINITY; na];
    let mut terms = vec![0.0; ng];
    for d in 0..evaluator.states.len() {
        let k = node_labels[evaluator.node_of_demo[d]];
        let (s, old) = (evaluator.states[d], evaluator.actions[d]);
        for g in 0..ng {
            rest[g] = cluster_stats[k * ng + g] - cache.log_pi(g, s, old);
        }
        let mut any = false;
        for a in 0..na {
            let t = mdp.prob(s, a, successors[d]);
            if t == 0.0 {
                weights[a] = f64::NEG_INFINITY;
                continue;
            }
            any = true;
            for g in 0..ng {
                terms[g] = log_w[g] + rest[g] + cache.log_pi(g, s, a);
            }
            weights[a] = (t.ln() + crate::numeric::logsumexp(&terms)) * inv_t;
        }
        if !any {
            return Err(Error::InvalidDemos(format!(
                "transition {s} -> {} is impossible under every action",
                successors[d]
            )));
        }
        let new = sample_log_categorical(rng, &weights);
        if new != old {
            for g in 0..ng {
                cluster_stats[k * ng + g] += cache.log_pi(g, s, new) - cache.log_pi(g, s, old);
            }
            evaluator.set_action(d, new);
        }
    }
    Ok(())
}

/// Node graph, link prior and data layout shared by both ddCRP models.
struct LinkModel {
    kind: ModelKind,
    n_nodes: usize,
    scores: ScoreMatrix,
    node_of_demo: Vec<usize>,
}

struct DemoData {
    states: Vec<usize>,
    initial_actions: Vec<usize>,
    successors: Option<Vec<usize>>,
}

fn demo_data(mdp: &Mdp, demos: &DemoSet, cache: &LikelihoodCache) -> Result<DemoData> {
    cache.check_mdp(mdp)?;
    demos.check_states(mdp.n_states(), mdp.n_actions())?;
    let states = demos.states();
    match demos.kind() {
        DemoKind::StateAction => Ok(DemoData {
            initial_actions: demos.records().iter().map(|r| r.action.expect("state-action record")).collect(),
            states,
            successors: None,
        }),
        DemoKind::StateSuccessor => {
            let successors: Vec<usize> = demos.records().iter().map(|r| r.successor.expect("successor record")).collect();
            let initial_actions =
                states.iter().zip(&successors).map(|(&s, &n)| transition_argmax(mdp, s, n)).collect::<Result<_>>()?;
            Ok(DemoData { states, initial_actions, successors: Some(successors) })
        }
    }
}

fn successor_log_prob(mdp: &Mdp, data: &DemoData, actions: &[usize]) -> f64 {
    match &data.successors {
        Some(next) => data.states.iter().zip(next).zip(actions).map(|((&s, &n), &a)| mdp.prob(s, a, n).ln()).sum(),
        None => 0.0,
    }
}

fn chain_seed(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_link_chain(
    model: &LinkModel,
    mdp: &Mdp,
    cache: &LikelihoodCache,
    data: &DemoData,
    config: &InferenceConfig,
    tempered: bool,
    mut rng: ChaCha8Rng,
) -> Result<Vec<PartitionSample>> {
    let mut evaluator =
        DemoEvaluator::new(cache, model.n_nodes, model.node_of_demo.clone(), data.states.clone(), data.initial_actions.clone());
    let mut state = match &config.init {
        InitialPartition::SelfLinks => PartitionState::self_links(model.n_nodes, &evaluator),
        InitialPartition::SingleCluster => PartitionState::single_cluster(model.n_nodes, &evaluator),
        InitialPartition::Given(links) => {
            if links.len() != model.n_nodes {
                return Err(Error::InvalidArgument(format!(
                    "initial links cover {} nodes, model has {}",
                    links.len(),
                    model.n_nodes
                )));
            }
            PartitionState::new(links.clone(), &evaluator)?
        }
    };
    let mut scratch = SweepScratch::default();
    let mut samples = Vec::new();
    for sweep in 0..config.sweeps {
        let temperature = if tempered { anneal_temperature(sweep, config) } else { 1.0 };
        gibbs_sweep(&mut state, &model.scores, &evaluator, temperature, config.order, &mut scratch, &mut rng);
        if let Some(successors) = &data.successors {
            let labels = state.labels();
            sample_actions(&labels, &mut evaluator, successors, mdp, temperature, &mut rng)?;
            state.refresh(&evaluator);
        }
        debug_assert!(sweep % 50 != 0 || state.check_invariants(&evaluator, 1e-6).is_ok());
        if sweep >= config.burn_in && (sweep - config.burn_in) % config.thin == 0 {
            let log_joint = state.log_joint(&model.scores) + successor_log_prob(mdp, data, evaluator.actions());
            samples.push(PartitionSample {
                sweep,
                temperature,
                links: Some(state.links().to_vec()),
                cluster_of: state.labels(),
                log_joint,
                actions: data.successors.as_ref().map(|_| evaluator.actions().to_vec()),
            });
        }
    }
    Ok(samples)
}

fn run_chains<F>(config: &InferenceConfig, run: F) -> Result<(Vec<PartitionSample>, Vec<PartitionSample>)>
where
    F: Fn(bool, ChaCha8Rng) -> Result<Vec<PartitionSample>> + Sync,
{
    let (hot, cold) = rayon::join(
        || if config.run_tempered_chain { run(true, chain_seed(config.seed, 0)).map(Some) } else { Ok(None) },
        || if config.run_cold_chain { run(false, chain_seed(config.seed, 1)).map(Some) } else { Ok(None) },
    );
    Ok((hot?.unwrap_or_default(), cold?.unwrap_or_default()))
}

fn infer_links(model: LinkModel, mdp: &Mdp, cache: &LikelihoodCache, data: DemoData, config: &InferenceConfig) -> Result<PosteriorBundle> {
    let (samples, cold_samples) =
        run_chains(config, |tempered, rng| run_link_chain(&model, mdp, cache, &data, config, tempered, rng))?;
    Ok(PosteriorBundle {
        model: model.kind,
        n_nodes: model.n_nodes,
        demo_kind: if data.successors.is_some() { DemoKind::StateSuccessor } else { DemoKind::StateAction },
        samples,
        cold_samples,
        provenance: Provenance { config_hash: config.hash(), cache_hash: cache_hash(cache) },
    })
}

/// Link prior over states for ddBNIRL-S, from the hitting-time metric.
pub fn spatial_scores(cache: &LikelihoodCache, config: &InferenceConfig) -> Result<ScoreMatrix> {
    let delta = cache.hitting_times()?;
    let n = delta.n();
    let score = config.score.resolve(delta.as_slice(), n)?;
    ddcrp::score_matrix(delta.as_slice(), n, &score)
}

/// Temporal distances `|t_d - t_d'|` between demonstrations.
pub fn temporal_distances(demos: &DemoSet, gap_factor: f64) -> Vec<f64> {
    let t = demos.effective_timestamps(gap_factor);
    let n = t.len();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push((t[i] - t[j]).abs());
        }
    }
    out
}

/// ddBNIRL-S: Gibbs sampling of one link per state, with state clusters
/// explaining the demonstrations recorded at their member states.
pub fn infer_ddbnirl_s(mdp: &Mdp, demos: &DemoSet, cache: &LikelihoodCache, config: &InferenceConfig) -> Result<PosteriorBundle> {
    config.validate()?;
    let data = demo_data(mdp, demos, cache)?;
    let model = LinkModel {
        kind: ModelKind::Spatial,
        n_nodes: mdp.n_states(),
        scores: spatial_scores(cache, config)?,
        node_of_demo: data.states.clone(),
    };
    infer_links(model, mdp, cache, data, config)
}

/// ddBNIRL-T: Gibbs sampling of one link per demonstration under the
/// temporal distance between demonstrations.
pub fn infer_ddbnirl_t(mdp: &Mdp, demos: &DemoSet, cache: &LikelihoodCache, config: &InferenceConfig) -> Result<PosteriorBundle> {
    config.validate()?;
    let data = demo_data(mdp, demos, cache)?;
    let n = demos.len();
    let distances = temporal_distances(demos, config.trajectory_gap_factor);
    let score = config.score.resolve(&distances, n)?;
    let model = LinkModel {
        kind: ModelKind::Temporal,
        n_nodes: n,
        scores: ddcrp::score_matrix(&distances, n, &score)?,
        node_of_demo: (0..n).collect(),
    };
    infer_links(model, mdp, cache, data, config)
}

/// `log` of the CRP partition probability for block sizes `sizes`.
pub fn crp_log_prob(sizes: &[usize], alpha: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let k = sizes.len();
    if n == 0 {
        return 0.0;
    }
    let alpha_term = if k == 1 { 0.0 } else { (k - 1) as f64 * alpha.ln() };
    let rising: f64 = (1..n).map(|i| (alpha + i as f64).ln()).sum();
    let factorials: f64 = sizes.iter().map(|&m| (1..m).map(|i| (i as f64).ln()).sum::<f64>()).sum();
    alpha_term - rising + factorials
}

struct CrpCluster {
    members: Vec<usize>,
    stats: Vec<f64>,
    log_like: f64,
}

fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

fn run_crp_chain(
    mdp: &Mdp,
    cache: &LikelihoodCache,
    data: &DemoData,
    config: &InferenceConfig,
    tempered: bool,
    mut rng: ChaCha8Rng,
) -> Result<Vec<PartitionSample>> {
    let n = data.states.len();
    let mut evaluator = DemoEvaluator::new(cache, n, (0..n).collect(), data.states.clone(), data.initial_actions.clone());
    let alpha = config.crp_alpha;
    let mut labels: Vec<usize> = match &config.init {
        InitialPartition::SelfLinks => (0..n).collect(),
        InitialPartition::SingleCluster => vec![0; n],
        InitialPartition::Given(labels) if labels.len() == n => labels.clone(),
        InitialPartition::Given(labels) => {
            return Err(Error::InvalidArgument(format!("initial labels cover {} demos, data has {n}", labels.len())))
        }
    };
    let mut samples = Vec::new();
    let mut weights = Vec::new();
    let mut merged = Vec::new();
    for sweep in 0..config.sweeps {
        let temperature = if tempered { anneal_temperature(sweep, config) } else { 1.0 };
        let inv_t = 1.0 / temperature;
        // rebuild clusters from labels so cached sums never drift
        let mut clusters: Vec<CrpCluster> = Vec::new();
        let mut slot_of_label = std::collections::HashMap::new();
        let mut slot_of: Vec<usize> = Vec::with_capacity(n);
        for (d, &l) in labels.iter().enumerate() {
            let slot = *slot_of_label.entry(l).or_insert_with(|| {
                clusters.push(CrpCluster { members: Vec::new(), stats: evaluator.empty_stats(), log_like: 0.0 });
                clusters.len() - 1
            });
            clusters[slot].members.push(d);
            evaluator.add_node(&mut clusters[slot].stats, d);
            slot_of.push(slot);
        }
        for c in &mut clusters {
            c.log_like = evaluator.log_marginal(&c.stats);
        }
        let mut node_stats = evaluator.empty_stats();
        for d in 0..n {
            let slot = slot_of[d];
            node_stats.iter_mut().for_each(|x| *x = 0.0);
            evaluator.add_node(&mut node_stats, d);
            {
                let c = &mut clusters[slot];
                c.members.retain(|&m| m != d);
                for (s, x) in c.stats.iter_mut().zip(&node_stats) {
                    *s -= x;
                }
                c.log_like = if c.members.is_empty() { 0.0 } else { evaluator.log_marginal(&c.stats) };
            }
            weights.clear();
            let live: Vec<usize> = (0..clusters.len()).filter(|&k| !clusters[k].members.is_empty()).collect();
            for &k in &live {
                let c = &clusters[k];
                merged.clear();
                merged.extend(c.stats.iter().zip(&node_stats).map(|(a, b)| a + b));
                let w = (c.members.len() as f64).ln() + evaluator.log_marginal(&merged) - c.log_like;
                weights.push(w * inv_t);
            }
            weights.push((alpha.ln() + evaluator.log_marginal(&node_stats)) * inv_t);
            let choice = sample_log_categorical(&mut rng, &weights);
            let target = if choice < live.len() {
                live[choice]
            } else {
                // reuse an empty slot when possible
                match (0..clusters.len()).find(|&k| clusters[k].members.is_empty()) {
                    Some(k) => k,
                    None => {
                        clusters.push(CrpCluster { members: Vec::new(), stats: evaluator.empty_stats(), log_like: 0.0 });
                        clusters.len() - 1
                    }
                }
            };
            let c = &mut clusters[target];
            c.members.push(d);
            for (s, x) in c.stats.iter_mut().zip(&node_stats) {
                *s += x;
            }
            c.log_like = evaluator.log_marginal(&c.stats);
            slot_of[d] = target;
        }
        labels = canonical_labels(&slot_of);
        if let Some(successors) = &data.successors {
            sample_actions(&labels, &mut evaluator, successors, mdp, temperature, &mut rng)?;
        }
        if sweep >= config.burn_in && (sweep - config.burn_in) % config.thin == 0 {
            let k = labels.iter().max().map_or(0, |m| m + 1);
            let mut sizes = vec![0usize; k];
            let mut stats = vec![evaluator.empty_stats(); k];
            for (d, &l) in labels.iter().enumerate() {
                sizes[l] += 1;
                evaluator.add_node(&mut stats[l], d);
            }
            let like: f64 = stats.iter().map(|s| evaluator.log_marginal(s)).sum();
            samples.push(PartitionSample {
                sweep,
                temperature,
                links: None,
                cluster_of: labels.clone(),
                log_joint: crp_log_prob(&sizes, alpha) + like + successor_log_prob(mdp, data, evaluator.actions()),
                actions: data.successors.as_ref().map(|_| evaluator.actions().to_vec()),
            });
        }
    }
    Ok(samples)
}

/// Vanilla BNIRL: collapsed Gibbs over per-demonstration CRP labels with
/// subgoals marginalized over the prior support.
pub fn infer_bnirl(mdp: &Mdp, demos: &DemoSet, cache: &LikelihoodCache, config: &InferenceConfig) -> Result<PosteriorBundle> {
    config.validate()?;
    let data = demo_data(mdp, demos, cache)?;
    let (samples, cold_samples) = run_chains(config, |tempered, rng| run_crp_chain(mdp, cache, &data, config, tempered, rng))?;
    Ok(PosteriorBundle {
        model: ModelKind::Bnirl,
        n_nodes: demos.len(),
        demo_kind: demos.kind(),
        samples,
        cold_samples,
        provenance: Provenance { config_hash: config.hash(), cache_hash: cache_hash(cache) },
    })
}

/// Demonstration `(state, action)` pairs, using a sample's actions when the
/// data carries successors instead.
pub fn sample_pairs(demos: &DemoSet, sample: &PartitionSample) -> Result<Vec<(usize, usize)>> {
    match (&sample.actions, demos.state_action_pairs()) {
        (Some(actions), _) => Ok(demos.states().into_iter().zip(actions.iter().copied()).collect()),
        (None, Some(pairs)) => Ok(pairs),
        (None, None) => Err(Error::InvalidDemos("state-successor data needs sampled actions".into())),
    }
}

/// Per-cluster subgoal statistics of one sample, keyed by canonical label.
pub(crate) fn cluster_goal_stats(
    cache: &LikelihoodCache,
    node_labels: &[usize],
    node_of_demo: impl Fn(usize) -> usize,
    pairs: &[(usize, usize)],
) -> Vec<Vec<f64>> {
    let k = node_labels.iter().max().map_or(0, |m| m + 1);
    let mut stats = vec![vec![0.0; cache.n_goals()]; k];
    for (d, &(s, a)) in pairs.iter().enumerate() {
        let st = &mut stats[node_labels[node_of_demo(d)]];
        for (g, x) in st.iter_mut().enumerate() {
            *x += cache.log_pi(g, s, a);
        }
    }
    stats
}

/// BNIRL-EXT: every state adopts the MAP subgoal of the MAP cluster of the
/// demonstration nearest to it in hitting time (lowest demo index on ties).
/// Returns the subgoal state for every state.
pub fn bnirl_ext_assign(bundle: &PosteriorBundle, cache: &LikelihoodCache, demos: &DemoSet) -> Result<Vec<usize>> {
    if demos.is_empty() {
        return Err(Error::InvalidDemos("BNIRL-EXT needs at least one demonstration".into()));
    }
    let sample = bundle.map_sample().ok_or_else(|| Error::InvalidArgument("empty bundle".into()))?;
    let pairs = sample_pairs(demos, sample)?;
    let stats = cluster_goal_stats(cache, &sample.cluster_of, |d| d, &pairs);
    let goal_of_cluster: Vec<usize> = stats
        .iter()
        .map(|st| posterior_from_stats(cache.prior(), st).map(|post| map_subgoal(&post, cache.prior())))
        .collect::<Result<_>>()?;
    let delta = cache.hitting_times()?;
    let states = demos.states();
    Ok((0..cache.n_states())
        .map(|s| {
            let nearest = nearest_demo(delta, s, &states);
            goal_of_cluster[sample.cluster_of[nearest]]
        })
        .collect())
}

/// Demonstration whose state is closest to `s` in hitting time, lowest
/// index on ties.
pub fn nearest_demo(delta: &crate::mdp::HittingTimeMatrix, s: usize, demo_states: &[usize]) -> usize {
    let mut best = 0;
    for (d, &sd) in demo_states.iter().enumerate().skip(1) {
        if delta.get(s, sd) < delta.get(s, demo_states[best]) {
            best = d;
        }
    }
    best
}

/// Greedy subgoal policy for every state from a per-state subgoal map.
pub fn subgoal_assignment_policy(cache: &LikelihoodCache, goal_of_state: &[usize]) -> Vec<usize> {
    goal_of_state
        .iter()
        .enumerate()
        .map(|(s, g)| {
            let gi = cache.support().iter().position(|x| x == g).expect("goal in support");
            cache.policy(gi)[s]
        })
        .collect()
}
