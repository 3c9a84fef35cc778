//! Subgoal action likelihoods, the subgoal prior, and cluster-level
//! marginal likelihoods and posteriors.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mdp::{self, greedy_policy, hitting_time_matrix, HittingTimeMatrix, Mdp, QTable};
use crate::numeric::{logsumexp, normalize_log};

/// `beta = ln(50)`: the best action is fifty times as likely as the worst.
pub fn default_beta() -> f64 {
    50f64.ln()
}

pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_REWARD_MASS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodMode {
    /// Softmax over raw optimal Q-values.
    Softmax,
    /// Softmax over per-state min-max normalized Q-values.
    Normalized,
}

impl std::fmt::Display for LikelihoodMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LikelihoodMode::Softmax => "softmax",
            LikelihoodMode::Normalized => "normalized",
        })
    }
}

/// Prior over subgoal locations, restricted to a support set of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalPrior {
    support: Vec<usize>,
    log_weights: Vec<f64>,
}

impl SubgoalPrior {
    pub fn new(support: Vec<usize>, weights: &[f64]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidArgument("subgoal prior support is empty".into()));
        }
        if weights.len() != support.len() {
            return Err(Error::InvalidArgument("prior weights and support differ in length".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("prior weights must be nonnegative and sum to 1 (sum {total})")));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(Error::InvalidArgument("prior support contains duplicates".into()));
        }
        Ok(SubgoalPrior { support, log_weights: weights.iter().map(|w| w.ln()).collect() })
    }

    /// Uniform over the given states (sorted, deduplicated).
    pub fn uniform(states: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut support: Vec<usize> = states.into_iter().collect();
        support.sort_unstable();
        support.dedup();
        let n = support.len();
        if n == 0 {
            return Err(Error::InvalidArgument("subgoal prior support is empty".into()));
        }
        Ok(SubgoalPrior { support, log_weights: vec![-(n as f64).ln(); n] })
    }

    pub fn uniform_all(n_states: usize) -> Result<Self> {
        Self::uniform(0..n_states)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn check_states(&self, n_states: usize) -> Result<()> {
        match self.support.iter().find(|&&g| g >= n_states) {
            Some(&g) => Err(Error::StateOutOfRange { index: g, n_states }),
            None => Ok(()),
        }
    }
}

/// Per-state min-max normalized Q-values ("relative advantages").
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedQ {
    pub values: QTable,
    pub epsilon: f64,
}

/// A row counts as constant when its spread is at rounding level.
fn is_constant_row(lo: f64, hi: f64) -> bool {
    hi - lo <= 1e-12 * (1.0 + hi.abs().max(lo.abs()))
}

pub fn normalize_q(q: &QTable, epsilon: f64) -> NormalizedQ {
    let mut values = Vec::with_capacity(q.values().len());
    for row in q.rows() {
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        if is_constant_row(lo, hi) {
            values.extend(std::iter::repeat(epsilon).take(row.len()));
        } else {
            values.extend(row.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)));
        }
    }
    NormalizedQ {
        values: QTable::new(q.n_states(), q.n_actions(), values).expect("same shape"),
        epsilon,
    }
}

/// Row-wise `log softmax(beta * values)` over a `(s, a)` table.
pub fn softmax_likelihood(values: &QTable, beta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.values().len());
    let mut scratch = vec![0.0; values.n_actions()];
    for row in values.rows() {
        for (x, v) in scratch.iter_mut().zip(row) {
            *x = beta * v;
        }
        let norm = logsumexp(&scratch);
        out.extend(scratch.iter().map(|x| x - norm));
    }
    out
}

/// Unit-reward subgoal plans for every state of an MDP: optimal Q-tables,
/// greedy policies and the hitting-time matrix they induce.
#[derive(Debug, Clone)]
pub struct SubgoalPlans {
    q_unit: Vec<QTable>,
    policies: Vec<Vec<usize>>,
    hitting_times: HittingTimeMatrix,
}

impl SubgoalPlans {
    pub fn compute(mdp: &Mdp, tol: f64) -> Result<Self> {
        let q_unit: Vec<QTable> = (0..mdp.n_states())
            .into_par_iter()
            .map(|g| mdp::subgoal_q(mdp, g, 1.0, tol))
            .collect::<Result<_>>()?;
        let policies: Vec<Vec<usize>> = q_unit.iter().map(greedy_policy).collect();
        let hitting_times = hitting_time_matrix(mdp, &policies)?;
        Ok(SubgoalPlans { q_unit, policies, hitting_times })
    }

    pub fn q_unit(&self, goal: usize) -> &QTable {
        &self.q_unit[goal]
    }

    pub fn policies(&self) -> &[Vec<usize>] {
        &self.policies
    }

    pub fn hitting_times(&self) -> &HittingTimeMatrix {
        &self.hitting_times
    }

    pub fn n_states(&self) -> usize {
        self.q_unit.len()
    }
}

/// Settings that determine a likelihood cache.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodConfig {
    pub mode: LikelihoodMode,
    pub beta: f64,
    pub reward_mass: f64,
    pub epsilon: f64,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        LikelihoodConfig {
            mode: LikelihoodMode::Normalized,
            beta: default_beta(),
            reward_mass: DEFAULT_REWARD_MASS,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Precomputed `log pi(a | s, g)` for every goal in the prior support,
/// together with the subgoal policies and hitting times.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodCache {
    n_states: usize,
    n_actions: usize,
    config: LikelihoodConfig,
    prior: SubgoalPrior,
    log_pi: Vec<f64>,
    policies: Vec<Vec<usize>>,
    hitting_times: Option<HittingTimeMatrix>,
}

fn check_config(config: &LikelihoodConfig) -> Result<()> {
    if !(config.beta >= 0.0) || !config.beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {}", config.beta)));
    }
    if !(config.reward_mass > 0.0) || !config.reward_mass.is_finite() {
        return Err(Error::InvalidArgument(format!("reward mass must be positive, got {}", config.reward_mass)));
    }
    if !(config.epsilon > 0.0 && config.epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {}", config.epsilon)));
    }
    Ok(())
}

fn log_pi_table(q: &QTable, config: &LikelihoodConfig) -> Vec<f64> {
    match config.mode {
        LikelihoodMode::Softmax => softmax_likelihood(q, config.beta),
        LikelihoodMode::Normalized => softmax_likelihood(&normalize_q(q, config.epsilon).values, config.beta),
    }
}

/// Plans every subgoal and builds the cache for `prior`.
pub fn build_cache(mdp: &Mdp, prior: &SubgoalPrior, config: LikelihoodConfig) -> Result<LikelihoodCache> {
    let plans = SubgoalPlans::compute(mdp, mdp::DEFAULT_TOL)?;
    LikelihoodCache::from_plans(&plans, mdp.n_actions(), prior, config)
}

impl LikelihoodCache {
    /// Builds the cache from precomputed unit-reward plans; the point-mass
    /// reward `C` enters as `C * Q_unit`.
    pub fn from_plans(
        plans: &SubgoalPlans,
        n_actions: usize,
        prior: &SubgoalPrior,
        config: LikelihoodConfig,
    ) -> Result<Self> {
        check_config(&config)?;
        prior.check_states(plans.n_states())?;
        let tables: Vec<Vec<f64>> = prior
            .support()
            .par_iter()
            .map(|&g| log_pi_table(&plans.q_unit(g).scaled(config.reward_mass), &config))
            .collect();
        Ok(LikelihoodCache {
            n_states: plans.n_states(),
            n_actions,
            config,
            prior: prior.clone(),
            log_pi: tables.concat(),
            policies: prior.support().iter().map(|&g| plans.policies()[g].clone()).collect(),
            hitting_times: Some(plans.hitting_times().clone()),
        })
    }

    /// Builds the cache for arbitrary per-goal reward vectors; planned
    /// exactly for each goal. No hitting times are attached.
    pub fn from_rewards<F>(mdp: &Mdp, prior: &SubgoalPrior, config: LikelihoodConfig, reward_of: F) -> Result<Self>
    where
        F: Fn(usize) -> Vec<f64> + Sync,
    {
        check_config(&config)?;
        prior.check_states(mdp.n_states())?;
        let solved: Vec<QTable> = prior
            .support()
            .par_iter()
            .map(|&g| mdp::solve_optimal(mdp, &reward_of(g), mdp::DEFAULT_TOL).map(|(_, q)| q))
            .collect::<Result<_>>()?;
        Ok(LikelihoodCache {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            config,
            prior: prior.clone(),
            log_pi: solved.iter().flat_map(|q| log_pi_table(q, &config)).collect(),
            policies: solved.iter().map(greedy_policy).collect(),
            hitting_times: None,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_goals(&self) -> usize {
        self.prior.len()
    }

    pub fn config(&self) -> &LikelihoodConfig {
        &self.config
    }

    pub fn mode(&self) -> LikelihoodMode {
        self.config.mode
    }

    pub fn beta(&self) -> f64 {
        self.config.beta
    }

    pub fn prior(&self) -> &SubgoalPrior {
        &self.prior
    }

    pub fn support(&self) -> &[usize] {
        self.prior.support()
    }

    /// `log pi(a | s, g)` with `g` given by its support index.
    pub fn log_pi(&self, goal_index: usize, s: usize, a: usize) -> f64 {
        self.log_pi[(goal_index * self.n_states + s) * self.n_actions + a]
    }

    pub fn log_pi_row(&self, goal_index: usize, s: usize) -> &[f64] {
        let start = (goal_index * self.n_states + s) * self.n_actions;
        &self.log_pi[start..start + self.n_actions]
    }

    pub fn log_pi_table(&self) -> &[f64] {
        &self.log_pi
    }

    /// Greedy policy of the goal at `goal_index`.
    pub fn policy(&self, goal_index: usize) -> &[usize] {
        &self.policies[goal_index]
    }

    pub fn hitting_times(&self) -> Result<&HittingTimeMatrix> {
        self.hitting_times
            .as_ref()
            .ok_or_else(|| Error::CacheMismatch("cache carries no hitting times".into()))
    }

    pub fn check_mdp(&self, mdp: &Mdp) -> Result<()> {
        if mdp.n_states() != self.n_states || mdp.n_actions() != self.n_actions {
            return Err(Error::CacheMismatch(format!(
                "cache is {}x{}, MDP is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }

    /// Per-goal summed log-likelihood `sum_d log pi(a_d | s_d, g)`.
    pub fn goal_log_likelihoods(&self, demos: &[(usize, usize)]) -> Vec<f64> {
        let mut stats = vec![0.0; self.n_goals()];
        self.accumulate(&mut stats, demos, 1.0);
        stats
    }

    /// Adds `sign * log pi(a | s, .)` of each pair into per-goal stats.
    pub fn accumulate(&self, stats: &mut [f64], demos: &[(usize, usize)], sign: f64) {
        for (gi, stat) in stats.iter_mut().enumerate() {
            for &(s, a) in demos {
                *stat += sign * self.log_pi(gi, s, a);
            }
        }
    }

    /// Stable key of everything the cache depends on.
    pub fn key(mdp: &Mdp, prior: &SubgoalPrior, config: &LikelihoodConfig) -> String {
        let mut h = Sha256::new();
        h.update(mdp.to_json().as_bytes());
        h.update(serde_json::to_vec(prior).expect("prior serializes"));
        h.update(serde_json::to_vec(config).expect("config serializes"));
        hex::encode(h.finalize())
    }

    /// Writes the cache as a little-endian binary sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = serde_json::to_vec(&SidecarHeader {
            n_states: self.n_states,
            n_actions: self.n_actions,
            config: self.config,
            prior: self.prior.clone(),
            policies: self.policies.clone(),
            has_hitting_times: self.hitting_times.is_some(),
        })?;
        let mut buf = Vec::with_capacity(header.len() + 8 * (self.log_pi.len() + self.n_states * self.n_states) + 16);
        buf.extend_from_slice(SIDECAR_MAGIC);
        buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
        buf.extend_from_slice(&header);
        for v in &self.log_pi {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(h) = &self.hitting_times {
            for v in h.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let corrupt = || Error::CacheMismatch(format!("{} is not a cache sidecar", path.display()));
        if bytes.len() < 12 || &bytes[..4] != SIDECAR_MAGIC {
            return Err(corrupt());
        }
        let header_len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let header: SidecarHeader = serde_json::from_slice(bytes.get(12..12 + header_len).ok_or_else(corrupt)?)?;
        let mut floats = bytes[12 + header_len..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let n_pi = header.prior.len() * header.n_states * header.n_actions;
        let log_pi: Vec<f64> = floats.by_ref().take(n_pi).collect();
        if log_pi.len() != n_pi {
            return Err(corrupt());
        }
        let hitting_times = if header.has_hitting_times {
            let delta: Vec<f64> = floats.collect();
            Some(HittingTimeMatrix::from_rows(header.n_states, delta).map_err(|_| corrupt())?)
        } else {
            None
        };
        Ok(LikelihoodCache {
            n_states: header.n_states,
            n_actions: header.n_actions,
            config: header.config,
            prior: header.prior,
            log_pi,
            policies: header.policies,
            hitting_times,
        })
    }

    /// Loads the sidecar for this key from `dir` if present, else builds and
    /// stores it.
    pub fn load_or_build(dir: impl AsRef<Path>, mdp: &Mdp, prior: &SubgoalPrior, config: LikelihoodConfig) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(format!("cache-{}.bin", Self::key(mdp, prior, &config)));
        if path.exists() {
            if let Ok(cache) = Self::load(&path) {
                if cache.prior == *prior && cache.config == config {
                    return Ok(cache);
                }
            }
        }
        let cache = build_cache(mdp, prior, config)?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        cache.save(&path)?;
        Ok(cache)
    }
}

const SIDECAR_MAGIC: &[u8; 4] = b"DDBC";

#[derive(Serialize, Deserialize)]
struct SidecarHeader {
    n_states: usize,
    n_actions: usize,
    config: LikelihoodConfig,
    prior: SubgoalPrior,
    policies: Vec<Vec<usize>>,
    has_hitting_times: bool,
}

fn check_prior(cache: &LikelihoodCache, prior: &SubgoalPrior) {
    assert_eq!(cache.support(), prior.support(), "prior support differs from the cache support");
}

/// `log sum_g p(g) prod_d pi(a_d | s_d, g)` from per-goal summed log-likelihoods.
pub fn log_marginal_from_stats(prior: &SubgoalPrior, stats: &[f64]) -> f64 {
    let max = prior.log_weights().iter().zip(stats).map(|(w, s)| w + s).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = prior.log_weights().iter().zip(stats).map(|(w, s)| (w + s - max).exp()).sum();
    max + sum.ln()
}

/// Log marginal action likelihood of a cluster's demonstrations.
pub fn cluster_log_marginal(cache: &LikelihoodCache, prior: &SubgoalPrior, demos: &[(usize, usize)]) -> f64 {
    check_prior(cache, prior);
    if demos.is_empty() {
        return 0.0;
    }
    log_marginal_from_stats(prior, &cache.goal_log_likelihoods(demos))
}

/// Posterior over the prior support given a cluster's demonstrations.
pub fn subgoal_posterior(cache: &LikelihoodCache, prior: &SubgoalPrior, demos: &[(usize, usize)]) -> Result<Vec<f64>> {
    check_prior(cache, prior);
    let stats = cache.goal_log_likelihoods(demos);
    posterior_from_stats(prior, &stats)
}

pub fn posterior_from_stats(prior: &SubgoalPrior, stats: &[f64]) -> Result<Vec<f64>> {
    let terms: Vec<f64> = prior.log_weights().iter().zip(stats).map(|(w, s)| w + s).collect();
    if logsumexp(&terms) == f64::NEG_INFINITY {
        return Err(Error::Degenerate("subgoal posterior has zero mass".into()));
    }
    Ok(normalize_log(&terms))
}

/// Support state with the highest posterior mass (lowest index on ties).
pub fn map_subgoal(posterior: &[f64], prior: &SubgoalPrior) -> usize {
    prior.support()[mdp::argmax_lowest(posterior)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::tests::chain;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_rows() {
        let q = QTable::new(2, 3, vec![2.0, 1.0, 0.0, 4.0, 4.0, 4.0]).unwrap();
        let n = normalize_q(&q, 1.0);
        assert_eq!(n.values.row(0), &[1.0, 0.5, 0.0]);
        assert_eq!(n.values.row(1), &[1.0, 1.0, 1.0]);
        let n = normalize_q(&q, 0.3);
        assert_eq!(n.values.row(1), &[0.3, 0.3, 0.3]);
    }

    #[test]
    fn normalize_is_affine_invariant() {
        let q = QTable::new(2, 3, vec![0.3, 1.7, -2.0, 5.0, 5.5, 4.0]).unwrap();
        let shifted = QTable::new(2, 3, q.values().iter().map(|v| 3.7 * v - 2.0).collect()).unwrap();
        let (a, b) = (normalize_q(&q, 1.0), normalize_q(&shifted, 1.0));
        for (x, y) in a.values.values().iter().zip(b.values.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn softmax_closed_forms() {
        let q = QTable::new(1, 2, vec![1.0, 0.0]).unwrap();
        let p: Vec<f64> = softmax_likelihood(&q, 4f64.ln()).iter().map(|l| l.exp()).collect();
        assert_abs_diff_eq!(p[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.2, epsilon = 1e-12);
        let uniform: Vec<f64> = softmax_likelihood(&q, 0.0).iter().map(|l| l.exp()).collect();
        assert_eq!(uniform, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_argmax_probability_is_monotone_in_beta() {
        let q = QTable::new(1, 3, vec![0.2, 0.9, 0.5]).unwrap();
        let mut last = 0.0;
        for k in 0..20 {
            let p = softmax_likelihood(&q, k as f64 * 0.5)[1].exp();
            assert!(p >= last - 1e-15);
            last = p;
        }
    }

    /// Cache over a 2-goal support whose single relevant row has
    /// `pi(0 | s=0, g0) = 0.8` and `pi(0 | s=0, g1) = 0.2`.
    fn handmade_cache() -> (LikelihoodCache, SubgoalPrior) {
        let prior = SubgoalPrior::uniform([4, 7]).unwrap();
        let log_pi = vec![0.8f64.ln(), 0.2f64.ln(), 0.2f64.ln(), 0.8f64.ln()];
        let cache = LikelihoodCache {
            n_states: 1,
            n_actions: 2,
            config: LikelihoodConfig::default(),
            prior: prior.clone(),
            log_pi,
            policies: vec![vec![0], vec![1]],
            hitting_times: None,
        };
        (cache, prior)
    }

    #[test]
    fn cluster_marginal_hand_arithmetic() {
        let (cache, prior) = handmade_cache();
        assert_eq!(cluster_log_marginal(&cache, &prior, &[]), 0.0);
        assert_abs_diff_eq!(cluster_log_marginal(&cache, &prior, &[(0, 0)]), 0.5f64.ln(), epsilon = 1e-12);
        let post = subgoal_posterior(&cache, &prior, &[(0, 0)]).unwrap();
        assert_abs_diff_eq!(post[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(post[1], 0.2, epsilon = 1e-12);
        assert_eq!(map_subgoal(&post, &prior), 4);
        assert_eq!(map_subgoal(&[0.5, 0.5], &prior), 4);
        let empty = subgoal_posterior(&cache, &prior, &[]).unwrap();
        assert_abs_diff_eq!(empty[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn beta_zero_is_uniform() {
        let mdp = chain(4, 0.9);
        let prior = SubgoalPrior::uniform_all(4).unwrap();
        let config = LikelihoodConfig { beta: 0.0, ..Default::default() };
        let cache = build_cache(&mdp, &prior, config).unwrap();
        let demos = [(0, 0), (1, 1), (2, 0)];
        assert_abs_diff_eq!(cluster_log_marginal(&cache, &prior, &demos), -3.0 * 2f64.ln(), epsilon = 1e-12);
        let post = subgoal_posterior(&cache, &prior, &demos).unwrap();
        for p in post {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn cache_rows_normalize_and_have_expected_shape() {
        let mdp = chain(5, 0.9);
        let prior = SubgoalPrior::uniform([3]).unwrap();
        let cache = build_cache(&mdp, &prior, LikelihoodConfig::default()).unwrap();
        assert_eq!(cache.log_pi_table().len(), 5 * 2);
        for s in 0..5 {
            let total: f64 = cache.log_pi_row(0, s).iter().map(|l| l.exp()).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let mdp = chain(4, 0.9);
        let prior = SubgoalPrior::uniform([1, 3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let built = LikelihoodCache::load_or_build(dir.path(), &mdp, &prior, LikelihoodConfig::default()).unwrap();
        let loaded = LikelihoodCache::load_or_build(dir.path(), &mdp, &prior, LikelihoodConfig::default()).unwrap();
        assert_eq!(built, loaded);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn prior_validation() {
        assert!(SubgoalPrior::uniform(Vec::<usize>::new()).is_err());
        assert!(SubgoalPrior::new(vec![0, 1], &[0.5, 0.6]).is_err());
        assert!(SubgoalPrior::new(vec![1, 1], &[0.5, 0.5]).is_err());
        let p = SubgoalPrior::new(vec![2, 0], &[0.25, 0.75]).unwrap();
        let total: f64 = p.log_weights().iter().map(|w| w.exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}
