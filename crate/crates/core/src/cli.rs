//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::gridworld::{make_gridworld, GridWorldSpec};
use crate::bench::metrics::{summarize, Acquisition};
use crate::bench::random_mdp::{make_random_mdp, simulate_expert, ExpertSpec, RandomMdpSpec};
use crate::bench::{
    self, active_learning_benchmark, leg_task, make_prior, random_mdp_benchmark, run_leg_task, run_rng, ActiveConfig,
    LegTaskConfig, PriorScope, RandomMdpBenchConfig,
};
use crate::ddcrp::SweepOrder;
use crate::demos::DemoSet;
use crate::error::{Error, Result};
use crate::io::{self, format_float, Envelope, Provenance};
use crate::likelihood::{build_cache, default_beta, LikelihoodCache, LikelihoodConfig, LikelihoodMode};
use crate::mdp::Mdp;
use crate::prediction::{
    cluster_predictives, entropy_map, map_policy, predictive_distribution, report_sample, PolicyMode,
};
use crate::samplers::{
    infer_bnirl, infer_ddbnirl_s, infer_ddbnirl_t, AnnealConfig, InferenceConfig, ModelKind, PosteriorBundle, ScorePrior,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DDBNIRL_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "ddbnirl", version, about = "Subgoal-based Bayesian nonparametric inverse reinforcement learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a grid world, random MDP or three-leg task to disk.
    Generate(GenerateArgs),
    /// Spatial model: one link per state under the hitting-time metric.
    InferS(InferArgs),
    /// Temporal model: one link per demonstration under timestamp distance.
    InferT(InferArgs),
    /// Exchangeable CRP baseline.
    InferBnirl(InferArgs),
    /// Predictive policy, entropy map and subgoal posteriors from a bundle.
    Predict(PredictArgs),
    /// Three-leg grid-world task scored against the generator.
    BenchGridworld(BenchGridworldArgs),
    /// Value loss of the spatial model and both CRP baselines on random MDPs.
    BenchRandomMdp(BenchRandomMdpArgs),
    /// Active learning on random MDPs.
    ActiveLearn(ActiveLearnArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerateKind {
    /// Empty grid world.
    Gridworld,
    /// 20 x 20 grid with a nine-cell wall bar.
    WallBar,
    /// Random MDP with expert demonstrations.
    RandomMdp,
    /// Three-leg expert trajectory on the wall-bar grid.
    LegTask,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: GenerateKind,
    #[arg(long, default_value_t = 20)]
    pub width: usize,
    #[arg(long, default_value_t = 20)]
    pub height: usize,
    #[arg(long, default_value_t = 0.7)]
    pub success_prob: f64,
    #[arg(long, default_value_t = 0.9)]
    pub discount: f64,
    /// Number of rewarded states (random MDP).
    #[arg(long, default_value_t = 10)]
    pub nr: usize,
    /// Expert trajectories of length 10 (random MDP).
    #[arg(long, default_value_t = 10)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LikelihoodArgs {
    #[arg(long, value_enum, default_value_t = LikelihoodMode::Normalized)]
    pub mode: LikelihoodMode,
    /// Inverse temperature of the action likelihood (default ln 50).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Subgoal reward mass C.
    #[arg(long, default_value_t = 1.0)]
    pub reward_mass: f64,
    #[arg(long, value_enum, default_value_t = PriorScope::Visited)]
    pub prior: PriorScope,
}

impl LikelihoodArgs {
    fn config(&self) -> LikelihoodConfig {
        LikelihoodConfig {
            mode: self.mode,
            beta: self.beta.unwrap_or_else(default_beta),
            reward_mass: self.reward_mass,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 2000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 0.05)]
    pub t_min: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the chain kept at temperature 1.
    #[arg(long)]
    pub no_cold_chain: bool,
    /// Decay scale of the link score; calibrated from the distances if unset.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = crate::ddcrp::DEFAULT_SCALE_QUANTILE)]
    pub scale_quantile: f64,
    #[arg(long, default_value_t = crate::ddcrp::DEFAULT_KAPPA)]
    pub kappa: f64,
    #[arg(long, default_value_t = crate::ddcrp::DEFAULT_SELF_LINK)]
    pub self_link: f64,
    /// CRP concentration of the baseline.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Visit nodes in random order within a sweep.
    #[arg(long)]
    pub random_scan: bool,
    /// Spacing between trajectories in median time steps (temporal model).
    #[arg(long, default_value_t = crate::demos::DEFAULT_TRAJECTORY_GAP_FACTOR)]
    pub gap_factor: f64,
}

impl ChainArgs {
    fn config(&self) -> InferenceConfig {
        InferenceConfig {
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            thin: self.thin,
            anneal: AnnealConfig { t0: 1.0, t_min: self.t_min },
            run_cold_chain: !self.no_cold_chain,
            seed: self.seed,
            score: ScorePrior {
                scale: self.scale,
                scale_quantile: self.scale_quantile,
                kappa: self.kappa,
                self_link: self.self_link,
            },
            crp_alpha: self.alpha,
            order: if self.random_scan { SweepOrder::Random } else { SweepOrder::Ascending },
            trajectory_gap_factor: self.gap_factor,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub mdp: PathBuf,
    #[arg(long)]
    pub demos: PathBuf,
    #[command(flatten)]
    pub likelihood: LikelihoodArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Directory for likelihood-cache sidecars.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Bundle JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Bundle JSON written by an infer command.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PolicyMode::Softmax)]
    pub policy_mode: PolicyMode,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchGridworldArgs {
    #[arg(long, default_value_t = 0.7)]
    pub success_prob: f64,
    #[command(flatten)]
    pub likelihood: LikelihoodArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchRandomMdpArgs {
    /// Number of rewarded states.
    #[arg(long, default_value_t = 10)]
    pub nr: usize,
    #[arg(long, default_value_t = 100)]
    pub runs: u64,
    /// Trajectory counts to sweep (10 decisions each).
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub trajectories: Vec<usize>,
    #[arg(long, value_enum, default_value_t = PolicyMode::Softmax)]
    pub policy_mode: PolicyMode,
    #[command(flatten)]
    pub likelihood: LikelihoodArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ActiveLearnArgs {
    /// Acquisition criteria; all four when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub criterion: Vec<Acquisition>,
    #[arg(long, default_value_t = 1)]
    pub nr: usize,
    #[arg(long, default_value_t = 200)]
    pub runs: u64,
    #[arg(long, default_value_t = 30)]
    pub budget: usize,
    #[arg(long, value_enum, default_value_t = PolicyMode::Optimal)]
    pub policy_mode: PolicyMode,
    #[arg(long, value_enum, default_value_t = LikelihoodMode::Normalized)]
    pub mode: LikelihoodMode,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = PriorScope::All)]
    pub prior: PriorScope,
    #[arg(long, default_value_t = 60)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 20)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 2)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code: 0 on success, 1 for invalid input, 2 for runtime
/// failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn out_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")))
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::InferS(a) => infer(a, ModelKind::Spatial),
        Command::InferT(a) => infer(a, ModelKind::Temporal),
        Command::InferBnirl(a) => infer(a, ModelKind::Bnirl),
        Command::Predict(a) => predict(a),
        Command::BenchGridworld(a) => bench_gridworld(a),
        Command::BenchRandomMdp(a) => bench_random_mdp(a),
        Command::ActiveLearn(a) => active_learn(a),
    }
}

/// MDP JSON with a provenance key alongside the model fields.
fn write_mdp(path: &Path, mdp: &Mdp, provenance: &Provenance) -> Result<()> {
    let mut value = serde_json::to_value(mdp)?;
    value.as_object_mut().expect("mdp serializes to an object").insert("provenance".into(), serde_json::to_value(provenance)?);
    io::write_json(path, &value)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let dir = out_dir(a.out.clone());
    #[derive(Serialize)]
    struct GenerateConfig<'a> {
        kind: GenerateKind,
        grid: Option<&'a GridWorldSpec>,
        random_mdp: Option<RandomMdpSpec>,
        expert: Option<ExpertSpec>,
        leg_task: Option<&'a LegTaskConfig>,
    }
    match a.kind {
        GenerateKind::Gridworld | GenerateKind::WallBar => {
            let base = if a.kind == GenerateKind::WallBar { GridWorldSpec::wall_bar() } else { GridWorldSpec::empty(a.width, a.height) };
            let spec = GridWorldSpec { success_prob: a.success_prob, discount: a.discount, ..base };
            let world = make_gridworld(spec.clone())?;
            let config = GenerateConfig { kind: a.kind, grid: Some(&spec), random_mdp: None, expert: None, leg_task: None };
            let prov = Provenance::new("generate", a.seed, &config, vec![])?;
            write_mdp(&dir.join("mdp.json"), &world.mdp, &prov)?;
            let cells = (0..world.n_states()).map(|s| {
                let (x, y) = world.cell(s);
                vec![s.to_string(), x.to_string(), y.to_string()]
            });
            io::write_csv(dir.join("cells.csv"), &prov, &io::csv_table(&["state", "x", "y"], cells)?)
        }
        GenerateKind::RandomMdp => {
            let spec = RandomMdpSpec { n_reward_states: a.nr, discount: a.discount, ..Default::default() };
            let expert = ExpertSpec { n_trajectories: a.trajectories, ..Default::default() };
            let mut rng = run_rng(a.seed, 0);
            let m = make_random_mdp(&spec, &mut rng)?;
            let e = simulate_expert(&m.mdp, &m.optimal_policy, &expert, &mut rng)?;
            let config = GenerateConfig { kind: a.kind, grid: None, random_mdp: Some(spec), expert: Some(expert), leg_task: None };
            let prov = Provenance::new("generate", a.seed, &config, vec![])?;
            write_mdp(&dir.join("mdp.json"), &m.mdp, &prov)?;
            let rows = (0..spec.n_states).map(|s| vec![s.to_string(), format_float(m.reward[s]), m.optimal_policy[s].to_string()]);
            io::write_csv(dir.join("reward.csv"), &prov, &io::csv_table(&["state", "reward", "optimal_action"], rows)?)?;
            io::write_csv(dir.join("demos.csv"), &prov, &io::demos_to_csv(&e.demos)?)?;
            let hidden = e.true_actions.iter().enumerate().map(|(d, a)| vec![d.to_string(), a.to_string()]);
            io::write_csv(dir.join("hidden_actions.csv"), &prov, &io::csv_table(&["demo", "action"], hidden)?)
        }
        GenerateKind::LegTask => {
            let grid = GridWorldSpec { success_prob: a.success_prob, discount: a.discount, ..GridWorldSpec::wall_bar() };
            let config = LegTaskConfig { grid, ..Default::default() };
            let task = leg_task(&config, a.seed)?;
            let gen = GenerateConfig { kind: a.kind, grid: None, random_mdp: None, expert: None, leg_task: Some(&config) };
            let prov = Provenance::new("generate", a.seed, &gen, vec![])?;
            write_mdp(&dir.join("mdp.json"), &task.world.mdp, &prov)?;
            io::write_csv(dir.join("demos.csv"), &prov, &io::demos_to_csv(&task.data.demos)?)?;
            let phases = task.data.phases.iter().enumerate().map(|(d, &p)| {
                vec![d.to_string(), p.to_string(), task.data.targets[p].to_string()]
            });
            io::write_csv(dir.join("phases.csv"), &prov, &io::csv_table(&["demo", "phase", "target"], phases)?)
        }
    }
}

/// Settings that fully determine an inference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferRunConfig {
    pub model: ModelKind,
    pub likelihood: LikelihoodConfig,
    pub prior: PriorScope,
    pub inference: InferenceConfig,
}

fn load_inputs(mdp_path: &Path, demos_path: &Path) -> Result<(Mdp, DemoSet)> {
    let mdp = Mdp::load(mdp_path)?;
    let demos = io::load_demos(demos_path)?;
    io::check_demo_rows(&demos, mdp.n_states(), mdp.n_actions(), demos_path)?;
    Ok((mdp, demos))
}

fn cache_for(mdp: &Mdp, demos: &DemoSet, scope: PriorScope, config: LikelihoodConfig, dir: Option<&Path>) -> Result<LikelihoodCache> {
    let prior = make_prior(scope, demos, mdp.n_states())?;
    match dir {
        Some(dir) => LikelihoodCache::load_or_build(dir, mdp, &prior, config),
        None => build_cache(mdp, &prior, config),
    }
}

fn infer(a: InferArgs, model: ModelKind) -> Result<()> {
    let (mdp, demos) = load_inputs(&a.mdp, &a.demos)?;
    let run = InferRunConfig { model, likelihood: a.likelihood.config(), prior: a.likelihood.prior, inference: a.chain.config() };
    run.inference.validate()?;
    let cache = cache_for(&mdp, &demos, run.prior, run.likelihood, a.cache_dir.as_deref())?;
    let bundle = match model {
        ModelKind::Spatial => infer_ddbnirl_s(&mdp, &demos, &cache, &run.inference)?,
        ModelKind::Temporal => infer_ddbnirl_t(&mdp, &demos, &cache, &run.inference)?,
        ModelKind::Bnirl => infer_bnirl(&mdp, &demos, &cache, &run.inference)?,
    };
    let command = match model {
        ModelKind::Spatial => "infer-s",
        ModelKind::Temporal => "infer-t",
        ModelKind::Bnirl => "infer-bnirl",
    };
    let inputs = vec![("mdp".into(), io::file_hash(&a.mdp)?), ("demos".into(), io::file_hash(&a.demos)?)];
    let provenance = Provenance::new(command, run.inference.seed, &run, inputs)?;
    let path = a.out.unwrap_or_else(|| out_dir(None).join(format!("bundle-{command}.json")));
    io::write_json(path, &Envelope { provenance, payload: bundle })
}

fn predict(a: PredictArgs) -> Result<()> {
    let missing = |flag: &str| Error::InvalidArgument(format!("predict needs --{flag}"));
    let bundle_path = a.bundle.ok_or_else(|| missing("bundle"))?;
    let mdp_path = a.mdp.ok_or_else(|| missing("mdp"))?;
    let demos_path = a.demos.ok_or_else(|| missing("demos"))?;
    let envelope: Envelope<PosteriorBundle> = io::read_json(&bundle_path)?;
    let run: InferRunConfig = serde_json::from_value(envelope.provenance.config.clone())?;
    let inputs = vec![
        ("mdp".to_string(), io::file_hash(&mdp_path)?),
        ("demos".to_string(), io::file_hash(&demos_path)?),
    ];
    if inputs != envelope.provenance.inputs {
        return Err(Error::InvalidArgument("the MDP or demonstration file differs from the one the bundle was inferred on".into()));
    }
    let (mdp, demos) = load_inputs(&mdp_path, &demos_path)?;
    let cache = cache_for(&mdp, &demos, run.prior, run.likelihood, a.cache_dir.as_deref())?;
    let bundle = envelope.payload;
    let pred = predictive_distribution(&bundle, &cache, &demos, a.policy_mode)?;

    #[derive(Serialize)]
    struct PredictConfig<'a> {
        bundle: &'a InferRunConfig,
        policy_mode: PolicyMode,
    }
    let mut all_inputs = inputs;
    all_inputs.push(("bundle".into(), io::file_hash(&bundle_path)?));
    let prov = Provenance::new("predict", run.inference.seed, &PredictConfig { bundle: &run, policy_mode: a.policy_mode }, all_inputs)?;
    let dir = out_dir(a.out);

    let policy = map_policy(&pred);
    let rows = policy.iter().enumerate().map(|(s, a)| vec![s.to_string(), a.to_string()]);
    io::write_csv(dir.join("policy.csv"), &prov, &io::csv_table(&["state", "action"], rows)?)?;
    let rows = entropy_map(&pred).into_iter().enumerate().map(|(s, h)| vec![s.to_string(), format_float(h)]);
    io::write_csv(dir.join("entropy.csv"), &prov, &io::csv_table(&["state", "entropy"], rows)?)?;
    let header: Vec<String> = std::iter::once("state".to_string()).chain((0..pred.n_actions()).map(|a| format!("a{a}"))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = pred.rows().enumerate().map(|(s, r)| std::iter::once(s.to_string()).chain(r.iter().map(|p| format_float(*p))).collect());
    io::write_csv(dir.join("predictive.csv"), &prov, &io::csv_table(&header, rows)?)?;

    let map = bundle.map_sample().ok_or_else(|| Error::InvalidArgument("bundle holds no samples".into()))?;
    let reports = report_sample(&bundle, &cache, &demos, map)?;
    let mut rows = Vec::new();
    for r in &reports {
        for (g, p) in cache.support().iter().zip(&r.posterior) {
            rows.push(vec![r.label.to_string(), r.members.len().to_string(), r.map_subgoal.to_string(), g.to_string(), format_float(*p)]);
        }
    }
    io::write_csv(
        dir.join("subgoals.csv"),
        &prov,
        &io::csv_table(&["cluster", "n_members", "map_subgoal", "goal", "posterior"], rows)?,
    )?;
    let rows = map.cluster_of.iter().enumerate().map(|(node, k)| vec![node.to_string(), k.to_string()]);
    io::write_csv(dir.join("partition.csv"), &prov, &io::csv_table(&["node", "cluster"], rows)?)?;
    if bundle.model != ModelKind::Spatial {
        let phases = cluster_predictives(&bundle, &cache, &demos, map, a.policy_mode)?;
        let rows = phases.iter().enumerate().flat_map(|(k, p)| {
            map_policy(p).into_iter().enumerate().map(move |(s, a)| vec![k.to_string(), s.to_string(), a.to_string()])
        });
        io::write_csv(dir.join("phase_policies.csv"), &prov, &io::csv_table(&["cluster", "state", "action"], rows.collect::<Vec<_>>())?)?;
    }
    Ok(())
}

fn bench_gridworld(a: BenchGridworldArgs) -> Result<()> {
    let mut config = LegTaskConfig { likelihood: a.likelihood.config(), prior: a.likelihood.prior, inference: a.chain.config(), ..Default::default() };
    config.grid.success_prob = a.success_prob;
    let result = run_leg_task(&config, a.chain.seed)?;
    let prov = Provenance::new("bench-gridworld", a.chain.seed, &config, vec![])?;
    let dir = out_dir(a.out);
    io::write_json(dir.join("gridworld.json"), &Envelope { provenance: prov.clone(), payload: &result })?;
    let mut rows = vec![
        vec!["n_demos".into(), result.n_demos.to_string()],
        vec!["temporal_agreement".into(), format_float(result.temporal_agreement)],
        vec!["spatial_agreement".into(), format_float(result.spatial_agreement)],
        vec!["temporal_switches".into(), result.temporal_switches.to_string()],
        vec!["bnirl_switches".into(), result.bnirl_switches.to_string()],
        vec!["temporal_clusters".into(), result.temporal_clusters.to_string()],
        vec!["spatial_clusters".into(), result.spatial_clusters.to_string()],
    ];
    for (leg, d) in result.subgoal_distances.iter().enumerate() {
        rows.push(vec![format!("subgoal_distance_leg{leg}"), format_float(*d)]);
    }
    io::write_csv(dir.join("gridworld.csv"), &prov, &io::csv_table(&["metric", "value"], rows)?)
}

fn bench_random_mdp(a: BenchRandomMdpArgs) -> Result<()> {
    let base = RandomMdpBenchConfig {
        mdp: RandomMdpSpec { n_reward_states: a.nr, ..Default::default() },
        likelihood: a.likelihood.config(),
        prior: a.likelihood.prior,
        policy_mode: a.policy_mode,
        inference: a.chain.config(),
        ..Default::default()
    };
    let configs: Vec<RandomMdpBenchConfig> = a
        .trajectories
        .iter()
        .map(|&n| RandomMdpBenchConfig { expert: ExpertSpec { n_trajectories: n, ..base.expert }, ..base.clone() })
        .collect();
    let mut runs = Vec::new();
    for config in &configs {
        runs.extend(random_mdp_benchmark(config, a.chain.seed, a.runs)?);
    }
    let prov = Provenance::new("bench-random-mdp", a.chain.seed, &configs, vec![])?;
    let dir = out_dir(a.out);
    let methods: [(&str, fn(&bench::RandomMdpRun) -> f64); 3] =
        [("ddbnirl-s", |r| r.ddbnirl_s), ("bnirl-ext", |r| r.bnirl_ext), ("bnirl", |r| r.bnirl)];
    let mut rows = Vec::new();
    for r in &runs {
        for (name, get) in methods {
            rows.push(vec![r.run.to_string(), r.n_demos.to_string(), name.to_string(), format_float(get(r))]);
        }
    }
    io::write_csv(dir.join("random_mdp_runs.csv"), &prov, &io::csv_table(&["run_id", "n_demos", "method", "loss"], rows)?)?;
    let mut sizes: Vec<usize> = runs.iter().map(|r| r.n_demos).collect();
    sizes.dedup();
    let mut agg = Vec::new();
    for n in sizes {
        for (name, get) in methods {
            let v: Vec<f64> = runs.iter().filter(|r| r.n_demos == n).map(get).collect();
            let s = summarize(&v);
            agg.push(vec![n.to_string(), name.to_string(), format_float(s.mean), format_float(s.std), format_float(s.stderr)]);
        }
    }
    io::write_csv(
        dir.join("random_mdp_aggregate.csv"),
        &prov,
        &io::csv_table(&["n_demos", "method", "mean", "std", "stderr"], agg)?,
    )
}

fn active_learn(a: ActiveLearnArgs) -> Result<()> {
    let criteria = if a.criterion.is_empty() {
        vec![Acquisition::Entropy, Acquisition::Confidence, Acquisition::Margin, Acquisition::Random]
    } else {
        a.criterion.clone()
    };
    let defaults = ActiveConfig::default();
    let config = ActiveConfig {
        mdp: RandomMdpSpec { n_reward_states: a.nr, ..defaults.mdp },
        budget: a.budget,
        likelihood: LikelihoodConfig { mode: a.mode, beta: a.beta.unwrap_or_else(default_beta), ..Default::default() },
        prior: a.prior,
        policy_mode: a.policy_mode,
        inference: InferenceConfig { sweeps: a.sweeps, burn_in: a.burn_in, thin: a.thin, ..defaults.inference },
        ..defaults
    };
    config.inference.validate()?;
    let runs = active_learning_benchmark(&config, &criteria, a.seed, a.runs)?;

    #[derive(Serialize)]
    struct ActiveRunConfig<'a> {
        config: &'a ActiveConfig,
        criteria: &'a [Acquisition],
        runs: u64,
    }
    let prov = Provenance::new("active-learn", a.seed, &ActiveRunConfig { config: &config, criteria: &criteria, runs: a.runs }, vec![])?;
    let dir = out_dir(a.out);
    let rows = runs.iter().flat_map(|r| {
        r.losses.iter().enumerate().map(move |(q, l)| vec![r.run.to_string(), r.criterion.to_string(), (q + 1).to_string(), format_float(*l)])
    });
    io::write_csv(dir.join("active_runs.csv"), &prov, &io::csv_table(&["run_id", "criterion", "query", "loss"], rows.collect::<Vec<_>>())?)?;
    let mut agg = Vec::new();
    for c in &criteria {
        for q in 0..config.budget {
            let v: Vec<f64> = runs.iter().filter(|r| r.criterion == *c).map(|r| r.losses[q]).collect();
            let s = summarize(&v);
            agg.push(vec![c.to_string(), (q + 1).to_string(), format_float(s.mean), format_float(s.std), format_float(s.stderr)]);
        }
    }
    io::write_csv(dir.join("active_aggregate.csv"), &prov, &io::csv_table(&["criterion", "query", "mean", "std", "stderr"], agg)?)
}
