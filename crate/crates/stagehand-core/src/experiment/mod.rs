//! Experiment orchestration: staged episodes, baselines, training
//! schedules, and ablation grids.
//!
//! The staged method runs each plan stage as *sequence → act*: a
//! motion-planned approach to the stage's region, then up to `h_l`
//! learner-controlled contact steps, cut short when the stage's
//! termination condition fires (in [`TerminationMode::Condition`]).
//! One learner instance is shared across all stages of a task and is
//! updated once per environment step.
//!
//! Two baselines bracket it: a monolithic policy over global features
//! with no sequencing or stage checks at all ([`run_e2e_episode`]), and
//! an open-loop scripted controller built from the same sequencing stack
//! ([`run_scripted_episode`]).
//!
//! Everything here is deterministic given `(config, seed)`: all
//! randomness flows from per-seed counter-based streams, so repeated
//! runs produce identical episode records, curves, and result rows.

mod episode;
mod results;
mod scripted;

pub use episode::{
    global_obs, local_obs, run_e2e_episode, run_psl_episode, EpisodeMode, E2E_ACTION_REPEAT,
};
pub use results::{manifest_json, parse_results_csv, results_csv, source_revision, ResultRow,
    RESULTS_HEADER};
pub use scripted::run_scripted_episode;

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::learn::{Learner, LearnerConfig, ReplayBuffer};
use crate::plan::{make_plan, Backend, Plan, PromptSpec, RemoteConfig};
use crate::seq::PlannerConfig;
use crate::sim::{task_spec, RenderConfig, Simulator};
use crate::terminate::Thresholds;

/// Default number of held-out episodes per evaluation point.
pub const DEFAULT_EVAL_EPISODES: usize = 10;

/// How an episode is controlled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Staged: sequence to each stage's region, then learned contact steps.
    Psl,
    /// Monolithic: one learned policy over global features, no stages.
    E2e,
    /// Open-loop heuristic skills on top of the sequencing stack.
    Scripted,
}

impl Method {
    /// Stable lowercase name used in CSV rows and file names.
    pub fn label(self) -> &'static str {
        match self {
            Method::Psl => "psl",
            Method::E2e => "e2e",
            Method::Scripted => "scripted",
        }
    }
}

/// When a stage hands control to the next one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationMode {
    /// Advance as soon as the stage's termination condition fires (or the
    /// per-stage budget runs out).
    Condition,
    /// Always spend the full per-stage budget before advancing.
    Timeout,
}

impl TerminationMode {
    /// Stable lowercase name used in CSV rows.
    pub fn label(self) -> &'static str {
        match self {
            TerminationMode::Condition => "condition",
            TerminationMode::Timeout => "timeout",
        }
    }
}

/// Which text backend produces plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendChoice {
    /// Canned reply for the task; offline and reproducible.
    Scripted,
    /// JSON-over-HTTP chat-completion endpoint.
    Remote(RemoteConfig),
}

impl BackendChoice {
    fn to_backend(&self, task: &str) -> Backend {
        match self {
            BackendChoice::Scripted => Backend::Scripted { task: task.to_string() },
            BackendChoice::Remote(cfg) => Backend::Remote(cfg.clone()),
        }
    }
}

/// Full description of one experiment. Serializable so a run's manifest can
/// reproduce it exactly; unknown keys are rejected rather than ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registered task name (e.g. "PickPlaceCan").
    pub task: String,
    pub method: Method,
    /// One training run per seed; must be non-empty.
    pub seeds: Vec<u64>,
    /// Training episodes per seed.
    pub total_episodes: usize,
    /// Per-stage step budget for the low-level policy (≥ 1).
    pub h_l: usize,
    /// Standard deviation of the position-estimate noise (m).
    pub sigma: f64,
    pub mode: TerminationMode,
    pub backend: BackendChoice,
    /// Evaluate every this many training episodes (≥ 1).
    pub eval_every: usize,
    /// Held-out episodes per evaluation point (≥ 1).
    pub eval_episodes: usize,
    /// Per-pixel label-flip probability for rendered masks.
    pub p_flip: f64,
    /// Mask erosion radius in pixels.
    pub r_erode: usize,
    pub learner: LearnerConfig,
    pub thresholds: Thresholds,
    pub planner: PlannerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            task: "PickPlaceCan".to_string(),
            method: Method::Psl,
            seeds: vec![0, 1, 2],
            total_episodes: 300,
            h_l: crate::sim::DEFAULT_STAGE_STEPS,
            sigma: 0.0,
            mode: TerminationMode::Condition,
            backend: BackendChoice::Scripted,
            eval_every: 50,
            eval_episodes: DEFAULT_EVAL_EPISODES,
            p_flip: 0.0,
            r_erode: 0,
            learner: LearnerConfig::default(),
            thresholds: Thresholds::default(),
            planner: PlannerConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// A default config for `task`.
    pub fn for_task(task: &str) -> ExperimentConfig {
        ExperimentConfig { task: task.to_string(), ..ExperimentConfig::default() }
    }

    /// Reject configs no run should start from.
    pub fn validate(&self) -> Result<(), RunError> {
        task_spec(&self.task)?;
        let bad = |msg: String| Err(RunError::Config { msg });
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        if self.h_l == 0 {
            return bad("h_l must be at least 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be at least 1".into());
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return bad(format!("sigma must be finite and non-negative (got {})", self.sigma));
        }
        if !self.p_flip.is_finite() || !(0.0..=1.0).contains(&self.p_flip) {
            return bad(format!("p_flip must be in [0, 1] (got {})", self.p_flip));
        }
        self.learner.validate()?;
        self.thresholds.validate()?;
        Ok(())
    }

    /// The position-estimate noise model this config asks for.
    pub fn noise(&self) -> crate::seq::NoiseModel {
        crate::seq::NoiseModel { sigma: self.sigma }
    }

    /// The render degradation this config asks for.
    pub fn render(&self) -> RenderConfig {
        RenderConfig { p_flip: self.p_flip, r_erode: self.r_erode }
    }
}

/// What happened in one stage of a staged or scripted episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub region: String,
    pub condition: String,
    /// Whether the motion-planned approach reached its goal.
    pub sequenced: bool,
    /// First error encountered in this stage, if any (sequencing or stage
    /// bookkeeping); the episode continues from wherever the arm is.
    pub fault: Option<String>,
    /// Whether the stage's termination condition ever fired.
    pub condition_met: bool,
    /// Contact-phase steps consumed (≤ the per-stage budget).
    pub steps_used: usize,
    /// Motion-planner wall time for the approach (s).
    pub planning_time: f64,
    /// Motion-planner tree samples for the approach.
    pub plan_samples: usize,
}

impl StageRecord {
    pub(crate) fn new(region: &str, condition: &str) -> StageRecord {
        StageRecord {
            region: region.to_string(),
            condition: condition.to_string(),
            sequenced: false,
            fault: None,
            condition_met: false,
            steps_used: 0,
            planning_time: 0.0,
            plan_samples: 0,
        }
    }

    /// Record `msg` as this stage's fault, keeping the first one if several
    /// things go wrong.
    pub(crate) fn note_fault(&mut self, msg: String) {
        if self.fault.is_none() {
            self.fault = Some(msg);
        }
    }
}

/// What happened in one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    /// Per-stage outcomes; empty for the monolithic baseline.
    pub stages: Vec<StageRecord>,
    /// Sum of per-step rewards (sequencing motion is reward-free).
    pub total_reward: f64,
    /// Contact-phase environment steps consumed.
    pub env_steps: usize,
    /// Whether the task's success predicate held when the episode ended.
    pub success: bool,
    /// Wall-clock episode duration (s), including planning.
    pub wall_time: f64,
}

/// One point on a training curve: evaluation on held-out scene seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalPoint {
    /// Training episodes completed when this evaluation ran.
    pub episode: usize,
    /// Fraction of evaluation episodes that ended in success.
    pub success_rate: f64,
    /// Mean evaluation-episode return.
    pub mean_reward: f64,
}

/// Everything produced by training (or, for the scripted method,
/// evaluating) one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    /// Evaluation points in training order; the last one is final
    /// performance. Empty exactly when `total_episodes` is zero.
    pub curve: Vec<EvalPoint>,
    /// Per-episode records from the training phase (empty for scripted).
    pub episodes: Vec<EpisodeRecord>,
    /// The trained policy; `None` for the scripted method.
    pub learner: Option<Learner>,
    /// Contact-phase environment steps consumed by training.
    pub env_steps: u64,
    /// Wall-clock duration of the whole run (s).
    pub wall_time: f64,
}

impl SeedRun {
    /// Final evaluated success rate (0 when the curve is empty).
    pub fn final_success(&self) -> f64 {
        self.curve.last().map_or(0.0, |p| p.success_rate)
    }
}

/// All seeds of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub cfg: ExperimentConfig,
    pub runs: Vec<SeedRun>,
}

impl ExperimentResult {
    /// Mean and sample standard deviation of final success across seeds.
    pub fn final_success(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(SeedRun::final_success).collect::<Vec<_>>())
    }

    /// One result row per seed per evaluation point, ready for CSV export.
    pub fn rows(&self) -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for run in &self.runs {
            for p in &run.curve {
                rows.push(ResultRow {
                    method: self.cfg.method.label().to_string(),
                    task: self.cfg.task.clone(),
                    seed: run.seed,
                    episode: p.episode,
                    success: p.success_rate,
                    sigma: self.cfg.sigma,
                    mode: self.cfg.mode.label().to_string(),
                });
            }
        }
        rows
    }
}

/// Fetch the plan the configured backend produces for the task.
pub fn resolve_plan(cfg: &ExperimentConfig) -> Result<Plan, RunError> {
    let spec = task_spec(&cfg.task)?;
    let plan = make_plan(
        &cfg.backend.to_backend(&cfg.task),
        &PromptSpec::for_task(&spec.description),
        &spec.vocabulary,
    )?;
    Ok(plan)
}

/// Scene seed for episode `i` of experiment seed `seed`. Training and
/// evaluation episodes draw from disjoint (odd/even) streams so evaluation
/// always runs on scenes training never saw.
fn episode_seed(seed: u64, i: usize, eval: bool) -> u64 {
    (seed << 32) | (2 * i as u64 + eval as u64)
}

/// Salt that decouples an evaluation episode's action stream from the scene
/// seed it plays on.
const EVAL_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Train (or for the scripted method, evaluate) one seed of `cfg`.
///
/// Training alternates collection and evaluation: before episodes
/// 0, `eval_every`, 2·`eval_every`, … and after the last episode, the
/// current policy runs `eval_episodes` greedy episodes on held-out scene
/// seeds. The scripted method learns nothing, so its curve is a single
/// evaluation point. A zero-episode config yields an empty curve.
pub fn train_one_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun, RunError> {
    cfg.validate()?;
    let t0 = Instant::now();
    let spec = task_spec(&cfg.task)?;
    let plan = resolve_plan(cfg)?;
    let mut sim = Simulator::new(&cfg.task, episode_seed(seed, 0, false))?;
    sim.render_cfg = cfg.render();

    // The monolithic baseline gets the same total step budget as the staged
    // method would: per-stage budget times the number of stages.
    let horizon = cfg.h_l * plan.steps.len();

    // All randomness for this run flows from one master stream: learner
    // init, exploration noise, replay sampling, and planner seeds.
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = match cfg.method {
        Method::Psl => {
            Some(Learner::new(sim.local_features().len(), cfg.learner.clone(), master.gen())?)
        }
        Method::E2e => {
            Some(Learner::new(Simulator::global_dim(&spec), cfg.learner.clone(), master.gen())?)
        }
        Method::Scripted => None,
    };
    let mut buffer = ReplayBuffer::new(cfg.learner.buffer_capacity);
    let mut env_step: u64 = 0;
    let mut curve = Vec::new();
    let mut episodes = Vec::new();

    let collect = if cfg.method == Method::Scripted { 0 } else { cfg.total_episodes };
    for i in 0..collect {
        if i % cfg.eval_every == 0 {
            curve.push(eval_point(cfg, i, &plan, learner.as_ref(), seed, &mut sim, horizon));
        }
        sim.reset(episode_seed(seed, i, false));
        let rec = match (cfg.method, learner.as_mut()) {
            (Method::Psl, Some(l)) => run_psl_episode(
                &mut sim,
                &plan.steps,
                EpisodeMode::Train { learner: l, buffer: &mut buffer, env_step: &mut env_step },
                cfg,
                &mut master,
            ),
            (Method::E2e, Some(l)) => run_e2e_episode(
                &mut sim,
                horizon,
                EpisodeMode::Train { learner: l, buffer: &mut buffer, env_step: &mut env_step },
                cfg,
                &mut master,
            ),
            _ => unreachable!("scripted runs collect no episodes"),
        };
        episodes.push(rec);
    }
    if cfg.total_episodes > 0 {
        let at = if cfg.method == Method::Scripted { 0 } else { cfg.total_episodes };
        curve.push(eval_point(cfg, at, &plan, learner.as_ref(), seed, &mut sim, horizon));
    }

    Ok(SeedRun {
        seed,
        curve,
        episodes,
        learner,
        env_steps: env_step,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

/// Evaluate the current policy (or scripted controller) on the held-out
/// scene-seed stream. Exploration is off; every evaluation episode is
/// deterministic in `(cfg, seed, j)` alone, so re-running an evaluation at
/// a different point in training cannot perturb it.
fn eval_point(
    cfg: &ExperimentConfig,
    episode: usize,
    plan: &Plan,
    learner: Option<&Learner>,
    seed: u64,
    sim: &mut Simulator,
    horizon: usize,
) -> EvalPoint {
    let mut successes = 0usize;
    let mut reward_sum = 0.0;
    for j in 0..cfg.eval_episodes {
        let env_seed = episode_seed(seed, j, true);
        sim.reset(env_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(env_seed ^ EVAL_STREAM_SALT);
        let rec = match (cfg.method, learner) {
            (Method::Psl, Some(l)) => run_psl_episode(
                sim,
                &plan.steps,
                EpisodeMode::Eval { learner: l },
                cfg,
                &mut rng,
            ),
            (Method::E2e, Some(l)) => {
                run_e2e_episode(sim, horizon, EpisodeMode::Eval { learner: l }, cfg, &mut rng)
            }
            _ => run_scripted_episode(sim, &plan.steps, cfg, &mut rng),
        };
        successes += rec.success as usize;
        reward_sum += rec.total_reward;
    }
    EvalPoint {
        episode,
        success_rate: successes as f64 / cfg.eval_episodes as f64,
        mean_reward: reward_sum / cfg.eval_episodes as f64,
    }
}

/// Run every seed of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, RunError> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        runs.push(train_one_seed(cfg, seed)?);
    }
    Ok(ExperimentResult { cfg: cfg.clone(), runs })
}

/// One cell of an ablation grid: a method trained and evaluated at one
/// noise level in one termination mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub method: Method,
    pub sigma: f64,
    pub mode: TerminationMode,
    /// Mean final success across seeds.
    pub mean_success: f64,
    /// Sample standard deviation of final success across seeds.
    pub std_success: f64,
    /// Final success per seed, in `cfg.seeds` order.
    pub per_seed: Vec<f64>,
}

/// Train the full grid `methods × sigmas × modes`, carrying everything else
/// from `base`. An empty axis yields an empty table.
pub fn ablation_suite(
    base: &ExperimentConfig,
    methods: &[Method],
    sigmas: &[f64],
    modes: &[TerminationMode],
) -> Result<Vec<AblationCell>, RunError> {
    let mut cells = Vec::new();
    for &method in methods {
        for &sigma in sigmas {
            for &mode in modes {
                let cfg = ExperimentConfig { method, sigma, mode, ..base.clone() };
                let result = run_experiment(&cfg)?;
                let per_seed: Vec<f64> =
                    result.runs.iter().map(SeedRun::final_success).collect();
                let (mean_success, std_success) = mean_std(&per_seed);
                cells.push(AblationCell {
                    method,
                    sigma,
                    mode,
                    mean_success,
                    std_success,
                    per_seed,
                });
            }
        }
    }
    Ok(cells)
}

/// Mean and sample standard deviation (n−1 denominator; 0 when n < 2).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
