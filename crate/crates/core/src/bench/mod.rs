//! Synthetic experiments: the three-leg grid-world task, the random-MDP
//! benchmark and the active-learning loop.

pub mod gridworld;
pub mod metrics;
pub mod random_mdp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demos::{DemoRecord, DemoSet};
use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodCache, LikelihoodConfig, SubgoalPlans, SubgoalPrior};
use crate::mdp::{self, HittingTimeMatrix};
use crate::prediction::{
    crp_frequency_predictive, map_policy, predictive_distribution, report_sample, PolicyMode, PredictiveDistribution,
};
use crate::samplers::{
    infer_bnirl, infer_ddbnirl_s, infer_ddbnirl_t, InferenceConfig,
    InitialPartition,
};

use gridworld::{leg_trajectory, make_gridworld, GridWorldSpec, LegDemos};
use metrics::{acquisition_score, label_switches, segmentation_agreement, value_loss_from_values, Acquisition};
use random_mdp::{expert_action, make_random_mdp, policy_values, simulate_expert, ExpertSpec, RandomMdp, RandomMdpSpec};

/// Independent generator for run `run` of an experiment seeded with `seed`.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Which states the subgoal prior covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PriorScope {
    /// States (and successors) seen in the demonstrations.
    #[default]
    Visited,
    /// Every state.
    All,
}

pub fn make_prior(scope: PriorScope, demos: &DemoSet, n_states: usize) -> Result<SubgoalPrior> {
    match scope {
        PriorScope::Visited => SubgoalPrior::uniform(demos.visited_states()),
        PriorScope::All => SubgoalPrior::uniform_all(n_states),
    }
}

// ---------------------------------------------------------------------------
// three-leg grid world

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegTaskConfig {
    pub grid: GridWorldSpec,
    pub start: (usize, usize),
    pub targets: Vec<(usize, usize)>,
    pub max_leg_steps: usize,
    /// Probability that the expert takes the greedy action.
    pub optimal_prob: f64,
    pub likelihood: LikelihoodConfig,
    pub prior: PriorScope,
    pub inference: InferenceConfig,
}

impl Default for LegTaskConfig {
    fn default() -> Self {
        LegTaskConfig {
            grid: GridWorldSpec::wall_bar(),
            start: (3, 17),
            targets: vec![(16, 17), (16, 3), (3, 3)],
            max_leg_steps: 60,
            optimal_prob: 0.9,
            likelihood: LikelihoodConfig::default(),
            prior: PriorScope::Visited,
            inference: InferenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegTaskResult {
    pub n_demos: usize,
    /// Matched agreement of the temporal MAP partition with the legs.
    pub temporal_agreement: f64,
    /// Matched agreement of the spatial MAP partition on visited states.
    pub spatial_agreement: f64,
    pub temporal_switches: usize,
    pub bnirl_switches: usize,
    /// Hitting time from each leg's MAP subgoal (temporal model, cluster
    /// holding most of the leg) to the leg target.
    pub subgoal_distances: Vec<f64>,
    pub temporal_clusters: usize,
    pub spatial_clusters: usize,
}

/// Majority cluster of each true phase.
fn majority_cluster(labels: &[usize], phases: &[usize], phase: usize) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for (l, p) in labels.iter().zip(phases) {
        if *p == phase {
            *counts.entry(*l).or_insert(0usize) += 1;
        }
    }
    counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(l, _)| *l).unwrap_or(0)
}

pub struct LegTask {
    pub world: gridworld::GridWorld,
    pub plans: SubgoalPlans,
    pub data: LegDemos,
    pub cache: LikelihoodCache,
}

pub fn leg_task(config: &LegTaskConfig, seed: u64) -> Result<LegTask> {
    let world = make_gridworld(config.grid.clone())?;
    let locate = |(x, y): (usize, usize)| {
        world.state(x, y).ok_or_else(|| Error::InvalidArgument(format!("cell ({x}, {y}) is not a free state")))
    };
    let start = locate(config.start)?;
    let targets: Vec<usize> = config.targets.iter().map(|&c| locate(c)).collect::<Result<_>>()?;
    let plans = SubgoalPlans::compute(&world.mdp, mdp::DEFAULT_TOL)?;
    let mut rng = run_rng(seed, 0);
    let data = leg_trajectory(
        &world.mdp,
        start,
        &targets,
        |g| plans.policies()[g].clone(),
        config.optimal_prob,
        config.max_leg_steps,
        &mut rng,
    )?;
    let prior = make_prior(config.prior, &data.demos, world.n_states())?;
    let cache = LikelihoodCache::from_plans(&plans, world.mdp.n_actions(), &prior, config.likelihood)?;
    Ok(LegTask { world, plans, data, cache })
}

pub fn run_leg_task(config: &LegTaskConfig, seed: u64) -> Result<LegTaskResult> {
    let task = leg_task(config, seed)?;
    let LegTask { world, data, cache, .. } = &task;
    let mdp = &world.mdp;
    let inference = InferenceConfig { seed, ..config.inference.clone() };
    let t = infer_ddbnirl_t(mdp, &data.demos, cache, &inference)?;
    let s = infer_ddbnirl_s(mdp, &data.demos, cache, &inference)?;
    let b = infer_bnirl(mdp, &data.demos, cache, &inference)?;
    let t_map = t.map_sample().expect("samples");
    let s_map = s.map_sample().expect("samples");
    let b_map = b.map_sample().expect("samples");

    let reports = report_sample(&t, cache, &data.demos, t_map)?;
    let delta = cache.hitting_times()?;
    let subgoal_distances = (0..data.targets.len())
        .map(|leg| {
            let k = majority_cluster(&t_map.cluster_of, &data.phases, leg);
            delta.get(reports[k].map_subgoal, data.targets[leg])
        })
        .collect();

    // spatial: label each visited state with its majority phase
    let states = data.demos.states();
    let mut visited: Vec<usize> = states.clone();
    visited.sort_unstable();
    visited.dedup();
    let truth: Vec<usize> = visited
        .iter()
        .map(|&v| {
            let phases: Vec<usize> = states.iter().zip(&data.phases).filter(|(s, _)| **s == v).map(|(_, p)| *p).collect();
            (0..data.targets.len()).max_by_key(|p| (phases.iter().filter(|x| *x == p).count(), std::cmp::Reverse(*p))).unwrap()
        })
        .collect();
    let predicted: Vec<usize> = visited.iter().map(|&v| s_map.cluster_of[v]).collect();

    Ok(LegTaskResult {
        n_demos: data.demos.len(),
        temporal_agreement: segmentation_agreement(&t_map.cluster_of, &data.phases)?,
        spatial_agreement: segmentation_agreement(&predicted, &truth)?,
        temporal_switches: label_switches(&t_map.cluster_of),
        bnirl_switches: label_switches(&b_map.cluster_of),
        subgoal_distances,
        temporal_clusters: t_map.n_clusters(),
        spatial_clusters: s_map.n_clusters(),
    })
}

// ---------------------------------------------------------------------------
// random MDP benchmark

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpBenchConfig {
    pub mdp: RandomMdpSpec,
    pub expert: ExpertSpec,
    pub likelihood: LikelihoodConfig,
    pub prior: PriorScope,
    pub policy_mode: PolicyMode,
    pub inference: InferenceConfig,
}

impl Default for RandomMdpBenchConfig {
    fn default() -> Self {
        RandomMdpBenchConfig {
            mdp: RandomMdpSpec::default(),
            expert: ExpertSpec::default(),
            likelihood: LikelihoodConfig::default(),
            prior: PriorScope::Visited,
            policy_mode: PolicyMode::Softmax,
            inference: InferenceConfig { sweeps: 400, burn_in: 150, thin: 5, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpRun {
    pub run: u64,
    pub n_demos: usize,
    pub ddbnirl_s: f64,
    pub bnirl_ext: f64,
    pub bnirl: f64,
}

pub fn random_mdp_run(config: &RandomMdpBenchConfig, seed: u64, run: u64) -> Result<RandomMdpRun> {
    let mut rng = run_rng(seed, run);
    let RandomMdp { mdp, reward, optimal_policy } = make_random_mdp(&config.mdp, &mut rng)?;
    let expert = simulate_expert(&mdp, &optimal_policy, &config.expert, &mut rng)?;
    let plans = SubgoalPlans::compute(&mdp, mdp::DEFAULT_TOL)?;
    let prior = make_prior(config.prior, &expert.demos, mdp.n_states())?;
    let cache = LikelihoodCache::from_plans(&plans, mdp.n_actions(), &prior, config.likelihood)?;
    let inference = InferenceConfig { seed: rng.gen(), ..config.inference.clone() };
    let v_star = policy_values(&mdp, &optimal_policy, &reward)?;
    let loss = |policy: &[usize]| value_loss_from_values(&v_star, &policy_values(&mdp, policy, &reward)?);

    let s = infer_ddbnirl_s(&mdp, &expert.demos, &cache, &inference)?;
    let s_policy = map_policy(&predictive_distribution(&s, &cache, &expert.demos, config.policy_mode)?);
    let b = infer_bnirl(&mdp, &expert.demos, &cache, &inference)?;
    // nearest-demo assignment averaged over the BNIRL posterior samples
    let ext_policy = map_policy(&predictive_distribution(&b, &cache, &expert.demos, config.policy_mode)?);
    let b_policy =
        map_policy(&crp_frequency_predictive(&b, &cache, &expert.demos, inference.crp_alpha, config.policy_mode)?);
    Ok(RandomMdpRun {
        run,
        n_demos: expert.demos.len(),
        ddbnirl_s: loss(&s_policy)?,
        bnirl_ext: loss(&ext_policy)?,
        bnirl: loss(&b_policy)?,
    })
}

/// Independent runs `0..n_runs`, executed in parallel.
pub fn random_mdp_benchmark(config: &RandomMdpBenchConfig, seed: u64, n_runs: u64) -> Result<Vec<RandomMdpRun>> {
    (0..n_runs).into_par_iter().map(|run| random_mdp_run(config, seed, run)).collect()
}

// ---------------------------------------------------------------------------
// active learning

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    pub mdp: RandomMdpSpec,
    pub optimal_prob: f64,
    pub budget: usize,
    pub likelihood: LikelihoodConfig,
    pub prior: PriorScope,
    pub policy_mode: PolicyMode,
    /// Chain settings of every refit; refits after the first start from the
    /// previous fit's final links.
    pub inference: InferenceConfig,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        ActiveConfig {
            mdp: RandomMdpSpec { n_reward_states: 1, ..Default::default() },
            optimal_prob: 0.9,
            budget: 30,
            likelihood: LikelihoodConfig::default(),
            prior: PriorScope::All,
            policy_mode: PolicyMode::Optimal,
            inference: InferenceConfig {
                sweeps: 60,
                burn_in: 20,
                thin: 2,
                run_tempered_chain: false,
                ..Default::default()
            },
        }
    }
}

/// A random MDP with its plans, shared by all criteria of one run.
pub struct ActiveProblem {
    pub random: RandomMdp,
    pub plans: SubgoalPlans,
    pub v_star: Vec<f64>,
}

impl ActiveProblem {
    pub fn generate(config: &ActiveConfig, seed: u64, run: u64) -> Result<Self> {
        let mut rng = run_rng(seed, run);
        let random = make_random_mdp(&config.mdp, &mut rng)?;
        let plans = SubgoalPlans::compute(&random.mdp, mdp::DEFAULT_TOL)?;
        let v_star = policy_values(&random.mdp, &random.optimal_policy, &random.reward)?;
        Ok(ActiveProblem { random, plans, v_star })
    }

    pub fn hitting_times(&self) -> &HittingTimeMatrix {
        self.plans.hitting_times()
    }
}

/// Next query state: acquisition argmax over all states (lowest index on
/// ties), or a uniform draw for the random criterion.
pub fn select_query<R: Rng + ?Sized>(pred: &PredictiveDistribution, kind: Acquisition, rng: &mut R) -> usize {
    if kind == Acquisition::Random {
        return rng.gen_range(0..pred.n_states());
    }
    let scores: Vec<f64> = pred.rows().map(|r| acquisition_score(r, kind)).collect();
    mdp::argmax_lowest(&scores)
}

/// Loss of the MAP policy after each of the `budget` demonstrations.
pub fn active_learning_run<R: Rng + ?Sized>(
    problem: &ActiveProblem,
    kind: Acquisition,
    config: &ActiveConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if config.budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let RandomMdp { mdp, reward, optimal_policy } = &problem.random;
    let ns = mdp.n_states();
    let query = |s: usize, rng: &mut R| expert_action(optimal_policy, mdp.n_actions(), s, config.optimal_prob, rng);
    let first = rng.gen_range(0..ns);
    let mut records = vec![DemoRecord::state_action(0, first, query(first, rng))];
    let mut links: Option<Vec<usize>> = None;
    let mut losses = Vec::with_capacity(config.budget);
    for step in 0..config.budget {
        let demos = DemoSet::new(records.clone())?;
        let prior = make_prior(config.prior, &demos, ns)?;
        let cache = LikelihoodCache::from_plans(&problem.plans, mdp.n_actions(), &prior, config.likelihood)?;
        let inference = InferenceConfig {
            seed: rng.gen(),
            init: links.take().map_or(config.inference.init.clone(), InitialPartition::Given),
            ..config.inference.clone()
        };
        let bundle = infer_ddbnirl_s(mdp, &demos, &cache, &inference)?;
        links = bundle.prediction_samples().last().and_then(|s| s.links.clone());
        let pred = predictive_distribution(&bundle, &cache, &demos, config.policy_mode)?;
        let policy = map_policy(&pred);
        losses.push(value_loss_from_values(&problem.v_star, &policy_values(mdp, &policy, reward)?)?);
        if step + 1 < config.budget {
            let s = select_query(&pred, kind, rng);
            let a = query(s, rng);
            log::debug!("query {step}: state {s} action {a} entropy {}", crate::numeric::entropy(pred.row(s)));
            records.push(DemoRecord::state_action(0, s, a));
        }
    }
    Ok(losses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveRun {
    pub run: u64,
    pub criterion: Acquisition,
    pub losses: Vec<f64>,
}

/// Runs every criterion on the same `n_runs` problems.
pub fn active_learning_benchmark(
    config: &ActiveConfig,
    criteria: &[Acquisition],
    seed: u64,
    n_runs: u64,
) -> Result<Vec<ActiveRun>> {
    let per_run: Vec<Vec<ActiveRun>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let problem = ActiveProblem::generate(config, seed, run)?;
            criteria
                .iter()
                .enumerate()
                .map(|(k, &criterion)| {
                    let mut rng = run_rng(seed ^ 0x5eed_0000_0000_0000, run * 16 + k as u64);
                    Ok(ActiveRun { run, criterion, losses: active_learning_run(&problem, criterion, config, &mut rng)? })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_run.into_iter().flatten().collect())
}
