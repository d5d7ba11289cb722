//! Advantage actor-critic training: rollout workers collecting n-step
//! segments, synchronized (or optionally asynchronous) updates, periodic
//! greedy evaluation and checkpointing.

mod agent;
mod eval;
mod loss;
mod rollout;

pub use agent::{argmax, choose, obs_mode_for, LearnedCommander};
pub use eval::{evaluate, mean, run_episode, run_episode_observed, std_dev, summarize, EvalReport, Rollout};
pub use loss::{
    a2c_gradients, a2c_update, apply_update, n_step_returns, LossConfig, LossStats, StepRecord, Trajectory, UpdateStats,
};
pub use rollout::{EpisodeStats, Segment, Worker};

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commanders::{self, Commander};
use crate::env::{Env, EnvError, ObsMode};
use crate::nn::{Checkpoint, NetConfig, NnError, PolicyNet, RmsProp, RmsPropConfig};
use crate::rng::SimRng;
use crate::scenario::{RewardScheme, Scenario};
use crate::sim::Force;

const EVAL_SALT: u64 = 0x6576_616c;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
}

/// Who commands the other force.
#[derive(Clone, Default)]
pub enum OpponentSpec {
    /// The scenario's configured controller.
    #[default]
    Scenario,
    /// `random`, `doctrine` or `bot:<level>`.
    Named(String),
    Factory(Arc<dyn Fn() -> Box<dyn Commander> + Send + Sync>),
}

impl std::fmt::Debug for OpponentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OpponentSpec::Scenario => write!(f, "Scenario"),
            OpponentSpec::Named(n) => write!(f, "Named({n})"),
            OpponentSpec::Factory(_) => write!(f, "Factory"),
        }
    }
}

impl OpponentSpec {
    pub fn build(&self) -> Result<Option<Box<dyn Commander>>, TrainError> {
        match self {
            OpponentSpec::Scenario => Ok(None),
            OpponentSpec::Named(n) => {
                commanders::by_name(n).map(Some).ok_or_else(|| TrainError::Config(format!("unknown opponent {n:?}")))
            }
            OpponentSpec::Factory(f) => Ok(Some(f())),
        }
    }

    /// Install the opponent in `env`. The scenario's controller only
    /// commands Red, so a Red learner needs an explicit opponent.
    pub fn attach(&self, env: Env, controlled: Force) -> Result<Env, TrainError> {
        match self.build()? {
            Some(c) => Ok(env.with_opponent(Some(c))),
            None if controlled == Force::Red => {
                Err(TrainError::Config("a Red learner needs an explicit opponent".into()))
            }
            None => Ok(env),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub workers: usize,
    pub n_steps: usize,
    pub gamma: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub learning_rate: f64,
    pub grad_clip: f64,
    pub total_env_steps: u64,
    /// Environment steps between evaluations.
    pub eval_period: u64,
    pub eval_rollouts: usize,
    /// Evaluations averaged into the rolling reward that ranks checkpoints.
    pub rolling_window: usize,
    pub seed: u64,
    pub dense: usize,
    pub lstm: usize,
    pub obs_mode: ObsMode,
    pub fog: bool,
    pub controlled: Force,
    /// Replaces the scenario's reward scheme when set.
    pub reward_scheme: Option<RewardScheme>,
    /// Lock-based asynchronous updates instead of synchronized rounds.
    pub asynchronous: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            workers: 8,
            n_steps: 20,
            gamma: 0.99,
            entropy_coef: 0.01,
            value_coef: 0.5,
            learning_rate: 7e-4,
            grad_clip: 40.0,
            total_env_steps: 200_000,
            eval_period: 20_000,
            eval_rollouts: 20,
            rolling_window: 1,
            seed: 0,
            dense: 64,
            lstm: 128,
            obs_mode: ObsMode::Vector,
            fog: true,
            controlled: Force::Blue,
            reward_scheme: None,
            asynchronous: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.n_steps == 0 || self.eval_rollouts == 0 || self.rolling_window == 0 {
            return bad("n_steps, eval_rollouts and rolling_window must be positive");
        }
        if self.eval_period == 0 {
            return bad("eval_period must be positive");
        }
        if !(self.learning_rate > 0.0 && self.grad_clip > 0.0) {
            return bad("learning_rate and grad_clip must be positive");
        }
        if self.dense == 0 || self.lstm == 0 {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    pub fn net_config(&self) -> NetConfig {
        let base = match &self.obs_mode {
            ObsMode::Vector => NetConfig::vector(),
            ObsMode::Spatial(cfg) => NetConfig::spatial(cfg),
        };
        NetConfig { dense: self.dense, lstm: self.lstm, ..base }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig { gamma: self.gamma, entropy_coef: self.entropy_coef, value_coef: self.value_coef }
    }

    pub fn optimizer(&self) -> RmsPropConfig {
        RmsPropConfig { learning_rate: self.learning_rate, clip: self.grad_clip, ..RmsPropConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub env_steps: u64,
    pub mean_reward: f64,
    pub rolling_reward: f64,
    pub mean_blue_casualties: f64,
    pub mean_red_casualties: f64,
    pub mean_goal_distance_km: f64,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub initial: Checkpoint,
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub evals: Vec<EvalPoint>,
    pub env_steps: u64,
    pub updates: u64,
    pub skipped_updates: u64,
    /// Worker crashes recovered from.
    pub incidents: u64,
}

struct Learner {
    net: PolicyNet,
    opt: RmsProp,
}

struct Progress {
    env_steps: u64,
    updates: u64,
    skipped: u64,
    incidents: u64,
    recent: VecDeque<f64>,
    log: Option<BufWriter<File>>,
    log_path: PathBuf,
    started: Instant,
}

const ROLLING_EPISODES: usize = 100;
const MAX_INCIDENTS: u64 = 1000;

impl Progress {
    fn record(&mut self, seg: &Segment, update: &UpdateStats) -> Result<(), TrainError> {
        self.env_steps += seg.env_steps;
        self.updates += 1;
        self.skipped += u64::from(update.skipped);
        for e in &seg.episodes {
            if self.recent.len() == ROLLING_EPISODES {
                self.recent.pop_front();
            }
            self.recent.push_back(e.reward);
        }
        let Some(log) = self.log.as_mut() else { return Ok(()) };
        let n = update.loss.steps.max(1) as f64;
        let rolling =
            if self.recent.is_empty() { String::new() } else { format!("{}", mean(self.recent.make_contiguous())) };
        let rate = self.env_steps as f64 / self.started.elapsed().as_secs_f64().max(1e-9);
        writeln!(
            log,
            "{},{},{},{},{},{},{},{:.1}",
            self.env_steps,
            self.updates,
            rolling,
            update.loss.policy_loss / n,
            update.loss.value_loss / n,
            update.loss.entropy / n,
            update.grad_norm,
            rate
        )
        .map_err(|e| TrainError::Io(self.log_path.clone(), e))
    }
}

pub const LOG_HEADER: &str = "env_steps,updates,rolling_reward,policy_loss,value_loss,entropy,grad_norm,steps_per_sec";

/// Per-worker step quotas summing to `min(remaining, workers * n_steps)`.
fn quotas(remaining: u64, workers: usize, n_steps: usize) -> Vec<usize> {
    let w = workers as u64;
    (0..w).map(|i| ((remaining + w - 1 - i) / w).min(n_steps as u64) as usize).collect()
}

type WorkerOutput = (Segment, Vec<f64>, LossStats);

fn run_worker(
    worker: &mut Worker,
    net: &PolicyNet,
    steps: usize,
    loss: &LossConfig,
) -> Result<WorkerOutput, TrainError> {
    let seg = worker.collect(net, steps)?;
    let mut grads = vec![0.0; net.param_count()];
    let stats = a2c_gradients(net, &seg.trajectories, loss, &mut grads)?;
    Ok((seg, grads, stats))
}

/// Runs a worker, converting a panic into `None` so the caller can
/// discard the segment and restart the worker.
fn guarded(
    worker: &mut Worker,
    net: &PolicyNet,
    steps: usize,
    loss: &LossConfig,
) -> Option<Result<WorkerOutput, TrainError>> {
    catch_unwind(AssertUnwindSafe(|| run_worker(worker, net, steps, loss))).ok()
}

struct Trainer {
    config: TrainConfig,
    scenario: Arc<Scenario>,
    opponent: OpponentSpec,
    workers: Vec<Worker>,
    generations: Vec<u64>,
    loss: LossConfig,
}

impl Trainer {
    fn restart(&mut self, i: usize, progress: &mut Progress, why: &str) -> Result<(), TrainError> {
        progress.incidents += 1;
        if progress.incidents > MAX_INCIDENTS {
            return Err(TrainError::Config(format!("giving up after {MAX_INCIDENTS} worker crashes")));
        }
        self.generations[i] += 1;
        log::error!("worker {i} crashed ({why}); segment discarded, restarting");
        self.workers[i] = Worker::new(&self.scenario, &self.config, &self.opponent, i, self.generations[i])?;
        Ok(())
    }

    /// One synchronized round: every worker collects with the same
    /// parameters, gradients are summed in worker order, one update.
    fn sync_round(&mut self, learner: &mut Learner, budget: u64, progress: &mut Progress) -> Result<(), TrainError> {
        let q = quotas(budget, self.workers.len(), self.config.n_steps);
        let net = &learner.net;
        let loss = &self.loss;
        let results: Vec<Option<Result<WorkerOutput, TrainError>>> = if self.workers.len() == 1 {
            vec![guarded(&mut self.workers[0], net, q[0], loss)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .workers
                    .iter_mut()
                    .zip(&q)
                    .map(|(w, &steps)| s.spawn(move || if steps == 0 { None } else { guarded(w, net, steps, loss) }))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap_or(None)).collect()
            })
        };
        let mut grads = vec![0.0; learner.net.param_count()];
        let mut stats = LossStats::default();
        let mut merged = Segment::default();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Some(Ok((seg, g, s))) => {
                    crate::nn::axpy(1.0, &g, &mut grads);
                    stats.add(&s);
                    merged.env_steps += seg.env_steps;
                    merged.episodes.extend(seg.episodes);
                }
                Some(Err(e)) => return Err(e),
                None if q[i] == 0 => {}
                None => self.restart(i, progress, "panic")?,
            }
        }
        let update = apply_update(&mut learner.net, &mut learner.opt, stats, &grads);
        progress.record(&merged, &update)
    }

    /// Workers run independent collect/update loops against a shared
    /// learner until `budget` steps are consumed.
    fn async_chunk(&mut self, learner: &mut Learner, budget: u64, progress: &mut Progress) -> Result<(), TrainError> {
        let shared = Mutex::new((&mut *learner, &mut *progress));
        let claimed = AtomicU64::new(0);
        let n_steps = self.config.n_steps as u64;
        let loss = &self.loss;
        let crashed: Mutex<Vec<usize>> = Mutex::new(Vec::new());
        let first_error: Mutex<Option<TrainError>> = Mutex::new(None);
        std::thread::scope(|s| {
            for (i, w) in self.workers.iter_mut().enumerate() {
                let (shared, claimed, crashed, first_error) = (&shared, &claimed, &crashed, &first_error);
                s.spawn(move || loop {
                    let start = claimed.fetch_add(n_steps, Ordering::SeqCst);
                    if start >= budget || first_error.lock().expect("lock").is_some() {
                        return;
                    }
                    let steps = (budget - start).min(n_steps) as usize;
                    let snapshot = shared.lock().expect("lock").0.net.clone();
                    match guarded(w, &snapshot, steps, loss) {
                        Some(Ok((seg, g, stats))) => {
                            let mut guard = shared.lock().expect("lock");
                            let (l, p) = &mut *guard;
                            let update = apply_update(&mut l.net, &mut l.opt, stats, &g);
                            if let Err(e) = p.record(&seg, &update) {
                                *first_error.lock().expect("lock") = Some(e);
                            }
                        }
                        Some(Err(e)) => {
                            *first_error.lock().expect("lock") = Some(e);
                            return;
                        }
                        None => {
                            crashed.lock().expect("lock").push(i);
                            return;
                        }
                    }
                });
            }
        });
        if let Some(e) = first_error.into_inner().expect("lock") {
            return Err(e);
        }
        for i in crashed.into_inner().expect("lock") {
            self.restart(i, progress, "panic")?;
        }
        Ok(())
    }
}

fn save(dir: Option<&Path>, name: &str, ck: &Checkpoint) -> Result<(), TrainError> {
    if let Some(d) = dir {
        ck.save(&d.join(name))?;
    }
    Ok(())
}

/// Everything one learner owns: network, optimizer, workers, log and the
/// checkpoints ranked so far.
struct Side {
    config: TrainConfig,
    scenario: Arc<Scenario>,
    out_dir: Option<PathBuf>,
    learner: Learner,
    progress: Progress,
    trainer: Trainer,
    initial: Checkpoint,
    best: Checkpoint,
    evals: Vec<EvalPoint>,
    eval_seed: u64,
}

impl Side {
    fn new(
        config: TrainConfig,
        scenario: Arc<Scenario>,
        opponent: OpponentSpec,
        out_dir: Option<&Path>,
    ) -> Result<Self, TrainError> {
        let net = PolicyNet::new(config.net_config(), config.seed);
        let opt = RmsProp::new(config.optimizer(), net.param_count());
        let learner = Learner { net, opt };

        let log_path = out_dir.map(|d| d.join("train_log.csv")).unwrap_or_default();
        let log = match out_dir {
            Some(d) => {
                std::fs::create_dir_all(d).map_err(|e| TrainError::Io(d.to_path_buf(), e))?;
                let mut f = BufWriter::new(File::create(&log_path).map_err(|e| TrainError::Io(log_path.clone(), e))?);
                writeln!(f, "{LOG_HEADER}").map_err(|e| TrainError::Io(log_path.clone(), e))?;
                Some(f)
            }
            None => None,
        };
        let progress = Progress {
            env_steps: 0,
            updates: 0,
            skipped: 0,
            incidents: 0,
            recent: VecDeque::new(),
            log,
            log_path,
            started: Instant::now(),
        };

        let initial = Checkpoint::new(&learner.net, config.controlled, Some(&learner.opt), 0);
        save(out_dir, "checkpoint_0.json", &initial)?;
        let workers = (0..config.workers)
            .map(|i| Worker::new(&scenario, &config, &opponent, i, 0))
            .collect::<Result<Vec<_>, _>>()?;
        let trainer = Trainer {
            config: config.clone(),
            scenario: scenario.clone(),
            opponent,
            workers,
            generations: vec![0; config.workers],
            loss: config.loss(),
        };
        let eval_seed = SimRng::derived(config.seed, EVAL_SALT).next_u64();
        Ok(Self {
            config,
            scenario,
            out_dir: out_dir.map(Path::to_path_buf),
            learner,
            progress,
            trainer,
            best: initial.clone(),
            initial,
            evals: Vec::new(),
            eval_seed,
        })
    }

    fn done(&self) -> bool {
        self.progress.env_steps >= self.config.total_env_steps
    }

    /// Step count of the next evaluation.
    fn next_eval(&self) -> u64 {
        let period = self.config.eval_period;
        ((self.progress.env_steps / period + 1) * period).min(self.config.total_env_steps)
    }

    /// One synchronized round, never past `target`.
    fn round(&mut self, target: u64) -> Result<(), TrainError> {
        let budget = target.saturating_sub(self.progress.env_steps);
        if budget > 0 {
            self.trainer.sync_round(&mut self.learner, budget, &mut self.progress)?;
        }
        Ok(())
    }

    fn train_until(&mut self, target: u64) -> Result<(), TrainError> {
        if self.config.asynchronous {
            self.trainer.async_chunk(&mut self.learner, target - self.progress.env_steps, &mut self.progress)
        } else {
            while self.progress.env_steps < target {
                self.round(target)?;
            }
            Ok(())
        }
    }

    /// Greedy evaluation against `opponent`; writes a checkpoint and keeps
    /// the best by rolling reward.
    fn evaluate(&mut self, opponent: &OpponentSpec) -> Result<(), TrainError> {
        let config = &self.config;
        let out_dir = self.out_dir.as_deref();
        let mut policy =
            LearnedCommander::new(Arc::new(self.learner.net.clone()), &self.scenario, true)?.omniscient(!config.fog);
        let report =
            evaluate(&self.scenario, config.controlled, &mut policy, config.eval_rollouts, opponent, self.eval_seed)?;
        let mean_reward = report.mean_reward();
        let window: Vec<f64> = self
            .evals
            .iter()
            .rev()
            .take(config.rolling_window - 1)
            .map(|e| e.mean_reward)
            .chain(std::iter::once(mean_reward))
            .collect();
        let point = EvalPoint {
            env_steps: self.progress.env_steps,
            mean_reward,
            rolling_reward: mean(&window),
            mean_blue_casualties: report.mean_blue_casualties(),
            mean_red_casualties: report.mean_red_casualties(),
            mean_goal_distance_km: mean(&report.column(|r| r.goal_distance_km)),
        };
        log::info!(
            "{:?} steps {} eval reward {:.3} rolling {:.3} blue cas {:.2}",
            config.controlled,
            point.env_steps,
            point.mean_reward,
            point.rolling_reward,
            point.mean_blue_casualties
        );
        let mut ck =
            Checkpoint::new(&self.learner.net, config.controlled, Some(&self.learner.opt), self.progress.env_steps);
        ck.rolling_reward = Some(point.rolling_reward);
        save(out_dir, &format!("checkpoint_{}.json", self.progress.env_steps), &ck)?;
        if self.best.rolling_reward.is_none_or(|b| point.rolling_reward > b) {
            self.best = ck.clone();
            save(out_dir, "best.json", &self.best)?;
        }
        self.evals.push(point);
        Ok(())
    }

    fn finish(mut self) -> Result<TrainReport, TrainError> {
        let out_dir = self.out_dir.as_deref();
        if let Some(log) = self.progress.log.as_mut() {
            log.flush().map_err(|e| TrainError::Io(self.progress.log_path.clone(), e))?;
        }
        let mut last = Checkpoint::new(
            &self.learner.net,
            self.config.controlled,
            Some(&self.learner.opt),
            self.progress.env_steps,
        );
        last.rolling_reward = self.evals.last().map(|e| e.rolling_reward);
        save(out_dir, "last.json", &last)?;
        if self.evals.is_empty() {
            save(out_dir, "best.json", &self.best)?;
        }
        Ok(TrainReport {
            initial: self.initial,
            best: self.best,
            last,
            evals: self.evals,
            env_steps: self.progress.env_steps,
            updates: self.progress.updates,
            skipped_updates: self.progress.skipped,
            incidents: self.progress.incidents,
        })
    }
}

fn with_scheme(config: &TrainConfig, scenario: &Scenario) -> Arc<Scenario> {
    let mut scenario = scenario.clone();
    if let Some(r) = &config.reward_scheme {
        scenario.reward_scheme = r.clone();
    }
    Arc::new(scenario)
}

/// Train a policy for `config.controlled` against `opponent`. With an
/// output directory, writes `checkpoint_<steps>.json` at every evaluation,
/// `best.json`, `last.json` and the CSV log `train_log.csv`.
pub fn train(
    config: &TrainConfig,
    scenario: &Scenario,
    opponent: &OpponentSpec,
    out_dir: Option<&Path>,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    let mut side = Side::new(config.clone(), with_scheme(config, scenario), opponent.clone(), out_dir)?;
    while !side.done() {
        let target = side.next_eval();
        side.train_until(target)?;
        side.evaluate(opponent)?;
    }
    side.finish()
}

/// The latest parameters of one learner, read by the other learner's
/// opponent commanders.
#[derive(Clone)]
struct PolicySlot(Arc<RwLock<Arc<PolicyNet>>>);

impl PolicySlot {
    fn new(net: &PolicyNet) -> Self {
        Self(Arc::new(RwLock::new(Arc::new(net.clone()))))
    }

    fn publish(&self, net: &PolicyNet) {
        *self.0.write().expect("lock") = Arc::new(net.clone());
    }

    fn latest(&self) -> Arc<PolicyNet> {
        self.0.read().expect("lock").clone()
    }

    /// Opponents that pick up the newest parameters at every episode start.
    fn opponent(&self, scenario: &Arc<Scenario>, greedy: bool, omniscient: bool) -> OpponentSpec {
        let (slot, scenario) = (self.clone(), scenario.clone());
        OpponentSpec::Factory(Arc::new(move || {
            Box::new(SlotCommander::new(slot.clone(), scenario.clone(), greedy, omniscient)) as Box<dyn Commander>
        }))
    }
}

struct SlotCommander {
    slot: PolicySlot,
    scenario: Arc<Scenario>,
    greedy: bool,
    omniscient: bool,
    inner: LearnedCommander,
}

impl SlotCommander {
    fn new(slot: PolicySlot, scenario: Arc<Scenario>, greedy: bool, omniscient: bool) -> Self {
        let inner = Self::build(&slot, &scenario, greedy, omniscient);
        Self { slot, scenario, greedy, omniscient, inner }
    }

    fn build(slot: &PolicySlot, scenario: &Scenario, greedy: bool, omniscient: bool) -> LearnedCommander {
        LearnedCommander::new(slot.latest(), scenario, greedy)
            .expect("both learners share one network layout")
            .omniscient(omniscient)
    }
}

impl Commander for SlotCommander {
    fn name(&self) -> String {
        "learner".into()
    }

    fn act(&mut self, view: &crate::env::ForceView, rng: &mut SimRng) -> crate::env::ActionSet {
        self.inner.act(view, rng)
    }

    fn full_vision(&self) -> bool {
        self.inner.full_vision()
    }

    fn reset(&mut self) {
        self.inner = Self::build(&self.slot, &self.scenario, self.greedy, self.omniscient);
    }
}

const RED_SEED_SALT: u64 = 0x7265_6400;

#[derive(Clone, Debug)]
pub struct PairReport {
    pub blue: TrainReport,
    pub red: TrainReport,
}

/// Train a Blue and a Red learner against each other in one scenario. The
/// learners alternate: each collects one segment per worker and updates
/// while the other's latest parameters command the opposing force, picked
/// up at episode starts. Each side is evaluated greedily against the
/// other's current greedy policy. With an output directory, each side
/// writes the files of [`train`] under `blue/` and `red/`.
pub fn train_pair(config: &TrainConfig, scenario: &Scenario, out_dir: Option<&Path>) -> Result<PairReport, TrainError> {
    config.validate()?;
    if config.asynchronous {
        return Err(TrainError::Config("paired training runs synchronous rounds only".into()));
    }
    let scenario = with_scheme(config, scenario);
    let blue_config = TrainConfig { controlled: Force::Blue, ..config.clone() };
    let red_config = TrainConfig {
        controlled: Force::Red,
        seed: SimRng::derived(config.seed, RED_SEED_SALT).next_u64(),
        ..config.clone()
    };
    let blue_slot = PolicySlot::new(&PolicyNet::new(blue_config.net_config(), blue_config.seed));
    let red_slot = PolicySlot::new(&PolicyNet::new(red_config.net_config(), red_config.seed));
    let omniscient = !config.fog;
    let dir = |name: &str| out_dir.map(|d| d.join(name));
    let mut blue = Side::new(
        blue_config,
        scenario.clone(),
        red_slot.opponent(&scenario, false, omniscient),
        dir("blue").as_deref(),
    )?;
    let mut red = Side::new(
        red_config,
        scenario.clone(),
        blue_slot.opponent(&scenario, false, omniscient),
        dir("red").as_deref(),
    )?;
    while !blue.done() {
        let target = blue.next_eval();
        while blue.progress.env_steps < target {
            blue.round(target)?;
            blue_slot.publish(&blue.learner.net);
            red.round(target)?;
            red_slot.publish(&red.learner.net);
        }
        blue.evaluate(&red_slot.opponent(&scenario, true, omniscient))?;
        red.evaluate(&blue_slot.opponent(&scenario, true, omniscient))?;
    }
    Ok(PairReport { blue: blue.finish()?, red: red.finish()? })
}
