use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use c2sim_core::commanders::{by_name, Commander};
use c2sim_core::env::{Env, EnvConfig, ObsMode, SpatialConfig};
use c2sim_core::nn::Checkpoint;
use c2sim_core::scenario::{builtin_skirmish, builtin_tigerclaw, parse_scenario, Scenario};
use c2sim_core::sim::Force;
use c2sim_core::train::{
    run_episode_observed, train, train_pair, EvalReport, LearnedCommander, OpponentSpec, Rollout, TrainConfig,
    TrainError, TrainReport,
};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bench::run_bench;
use crate::replay::{Recorder, Replay, ReplayError};
use crate::report::write_report;
use crate::session::{SessionConfig, SessionServer, Transport};
use crate::ui::UiServer;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Validation(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

fn runtime(context: &str) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "c2sim", version, about = "Tactical command-and-control wargaming harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario document and report every violation.
    Validate {
        /// Builtin name or scenario file.
        #[arg(long)]
        scenario: String,
    },
    /// Train an A2C commander.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a named commander over many rollouts.
    Eval(EvalArgs),
    /// Serve turn-based human play sessions.
    Play(PlayArgs),
    /// Re-simulate a replay file and check it.
    Replay(ReplayArgs),
    /// Measure simulation throughput.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Builtin name (`tigerclaw`, `skirmish`) or scenario file.
    #[arg(long, default_value = "skirmish")]
    pub scenario: String,
    /// Output directory for checkpoints and the training log.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON training config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eval_period: Option<u64>,
    #[arg(long)]
    pub eval_rollouts: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Train the Red force instead of Blue.
    #[arg(long, value_parser = parse_force)]
    pub side: Option<Force>,
    /// Commander for the other force; defaults to the scenario's.
    #[arg(long)]
    pub opponent: Option<String>,
    /// Use the spatial observation with n×n layers.
    #[arg(long)]
    pub spatial: Option<usize>,
    /// Asynchronous updates instead of synchronous rounds.
    #[arg(long)]
    pub asynchronous: bool,
    /// Train a Blue and a Red learner against each other; each side's
    /// files go under `<out>/blue` and `<out>/red`.
    #[arg(long, conflicts_with_all = ["side", "opponent", "asynchronous"])]
    pub pair: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long, conflicts_with = "policy", required_unless_present = "policy")]
    pub checkpoint: Option<PathBuf>,
    /// Named commander: `random`, `doctrine` or `bot:<1-10>`.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long, default_value = "tigerclaw")]
    pub scenario: String,
    #[arg(long, default_value_t = 100)]
    pub rollouts: usize,
    /// Commander for the other force; defaults to the scenario's.
    #[arg(long)]
    pub opponent: Option<String>,
    /// Side for a named policy; a checkpoint knows its own.
    #[arg(long, value_parser = parse_force, default_value = "blue")]
    pub side: Force,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record every rollout as a replay file here.
    #[arg(long)]
    pub replays: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[arg(long, default_value = "tigerclaw")]
    pub scenario: String,
    #[arg(long, value_parser = parse_force, default_value = "blue")]
    pub side: Force,
    #[arg(long)]
    pub opponent: Option<String>,
    /// Newline-delimited JSON listener.
    #[arg(long, default_value = "127.0.0.1:7777")]
    pub listen: String,
    /// WebSocket listener.
    #[arg(long)]
    pub ws: Option<String>,
    /// Serve the browser console over HTTP on this address (needs `--ws`).
    #[arg(long, requires = "ws")]
    pub serve_ui: Option<String>,
    /// Static console assets; a minimal built-in page otherwise.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[arg(long, default_value = "replays")]
    pub replays: PathBuf,
    /// Real-time cadence: per-tick order deadline in milliseconds.
    #[arg(long)]
    pub deadline_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop after this many sessions per listener.
    #[arg(long)]
    pub sessions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Replay file (`.tcrp`).
    #[arg(long)]
    pub file: PathBuf,
    /// Refuse the replay unless it was recorded on this scenario.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Write the regenerated event stream as JSON lines.
    #[arg(long)]
    pub events_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "tigerclaw")]
    pub scenario: String,
    #[arg(long, default_value_t = 100_000)]
    pub ticks: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value = "doctrine")]
    pub policy: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

fn parse_force(s: &str) -> Result<Force, String> {
    Force::parse(s).ok_or_else(|| format!("expected blue or red, got {s:?}"))
}

/// Resolve a builtin scenario name or read and validate a scenario file.
pub fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    match arg {
        "tigerclaw" | "tigerclaw-desk" => return Ok(builtin_tigerclaw()),
        "skirmish" => return Ok(builtin_skirmish()),
        _ => {}
    }
    let bytes = fs::read(arg).map_err(|e| CliError::Validation(format!("{arg}: {e}")))?;
    parse_scenario(&bytes).map_err(|e| {
        let lines: Vec<String> = e.0.iter().map(|v| format!("  {v}")).collect();
        CliError::Validation(format!("{arg}: {} violation(s)\n{}", e.0.len(), lines.join("\n")))
    })
}

fn commander(name: &str) -> Result<Box<dyn Commander>, CliError> {
    by_name(name)
        .ok_or_else(|| CliError::Usage(format!("unknown commander {name:?}; expected random, doctrine or bot:<1-10>")))
}

fn opponent_spec(name: &Option<String>) -> Result<OpponentSpec, CliError> {
    match name {
        Some(n) => {
            commander(n)?;
            Ok(OpponentSpec::Named(n.clone()))
        }
        None => Ok(OpponentSpec::Scenario),
    }
}

/// Parse `argv` (program name first) and run the command. Returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            println!(
                "{scenario}: ok ({}, {} units, content hash {:016x})",
                s.name,
                s.roster.iter().map(|u| u.count).sum::<u32>(),
                s.content_hash()
            );
            Ok(())
        }
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Play(a) => cmd_play(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&a.scenario)?;
    let mut config = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<TrainConfig>(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($flag:expr, $field:ident) => {
            if let Some(v) = $flag {
                config.$field = v;
            }
        };
    }
    set!(a.workers, workers);
    set!(a.steps, total_env_steps);
    set!(a.seed, seed);
    set!(a.eval_period, eval_period);
    set!(a.eval_rollouts, eval_rollouts);
    set!(a.lr, learning_rate);
    set!(a.side, controlled);
    if let Some(n) = a.spatial {
        config.obs_mode = ObsMode::Spatial(SpatialConfig { n, ..SpatialConfig::default() });
    }
    config.asynchronous |= a.asynchronous;
    fs::create_dir_all(&a.out).map_err(runtime("creating output directory"))?;
    if a.pair {
        let report = train_pair(&config, &scenario, Some(&a.out))?;
        print_train_report("blue ", &report.blue, &a.out.join("blue"));
        print_train_report("red ", &report.red, &a.out.join("red"));
    } else {
        let opponent = opponent_spec(&a.opponent)?;
        let report = train(&config, &scenario, &opponent, Some(&a.out))?;
        print_train_report("", &report, &a.out);
    }
    Ok(())
}

fn print_train_report(prefix: &str, report: &TrainReport, dir: &Path) {
    for p in &report.evals {
        println!(
            "{prefix}step {:>8}  reward {:>9.4}  rolling {:>9.4}  blue casualties {:.2}",
            p.env_steps, p.mean_reward, p.rolling_reward, p.mean_blue_casualties
        );
    }
    println!(
        "{prefix}trained {} env steps in {} updates ({} skipped, {} worker incidents); checkpoints in {}",
        report.env_steps,
        report.updates,
        report.skipped_updates,
        report.incidents,
        dir.display()
    );
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let scenario = Arc::new(load_scenario(&a.scenario)?);
    if a.rollouts == 0 {
        return Err(CliError::Usage("--rollouts must be at least 1".into()));
    }
    let (mut policy, side): (Box<dyn Commander>, Force) = match (&a.checkpoint, &a.policy) {
        (Some(path), _) => {
            let ck = Checkpoint::load(path).map_err(|e| CliError::Validation(e.to_string()))?;
            let net = ck.net().map_err(|e| CliError::Validation(e.to_string()))?;
            let c = LearnedCommander::new(Arc::new(net), &scenario, true)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            (Box::new(c), ck.controlled)
        }
        (None, Some(name)) => (commander(name)?, a.side),
        (None, None) => return Err(CliError::Usage("one of --checkpoint or --policy is required".into())),
    };
    let opponent = opponent_spec(&a.opponent)?;
    let config = EnvConfig { controlled: side, ..EnvConfig::default() };
    let env = Env::new(scenario.clone(), config).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut env = opponent.attach(env, side)?;
    if let Some(dir) = &a.replays {
        fs::create_dir_all(dir).map_err(runtime("creating replay directory"))?;
    }
    let mut rollouts = Vec::with_capacity(a.rollouts);
    for i in 0..a.rollouts as u64 {
        let seed = a.seed.wrapping_add(i);
        let (rollout, replay) = play_recorded(&mut env, policy.as_mut(), seed)?;
        if let Some(dir) = &a.replays {
            let path = dir.join(format!("rollout-{i}-seed{seed}.tcrp"));
            replay.save(&path).map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        rollouts.push(rollout);
    }
    let report = EvalReport { rollouts };
    let summary = match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(runtime("creating report"))?;
            write_report(&report, BufWriter::new(file))
        }
        None => write_report(&report, io::stdout().lock()),
    }
    .map_err(|e| CliError::Runtime(format!("writing report: {e}")))?;
    eprintln!("{summary}");
    Ok(())
}

/// Play one episode and record it.
pub fn play_recorded(env: &mut Env, policy: &mut dyn Commander, seed: u64) -> Result<(Rollout, Replay), CliError> {
    let mut names = [String::new(), String::new()];
    names[env.controlled().index()] = policy.name();
    names[env.controlled().opponent().index()] = env.opponent_name();
    env.reset(seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut recorder = Some(Recorder::for_env(env, seed, names));
    let rollout = run_episode_observed(env, policy, seed, |env, r| {
        if let Some(rec) = recorder.as_mut() {
            rec.record(r.reward, &r.info, env.world().expect("reset"));
        }
    })?;
    let replay = recorder.take().expect("recorder").finish(env);
    Ok((rollout, replay))
}

fn cmd_play(a: PlayArgs) -> Result<(), CliError> {
    let scenario = Arc::new(load_scenario(&a.scenario)?);
    let config = SessionConfig {
        scenario,
        side: a.side,
        opponent: a.opponent.clone(),
        seed: a.seed,
        deadline: a.deadline_ms.map(Duration::from_millis),
        replay_dir: Some(a.replays.clone()),
    };
    let bind = |addr: &str, t: Transport| {
        SessionServer::bind(addr, t, config.clone()).map_err(|e| match e {
            crate::session::SessionError::Config(m) => CliError::Usage(m),
            e => CliError::Runtime(format!("{addr}: {e}")),
        })
    };
    let tcp = bind(&a.listen, Transport::Ndjson)?;
    eprintln!("session server (json lines) on {}", tcp.local_addr().map_err(runtime("listener"))?);
    let ws = a.ws.as_deref().map(|addr| bind(addr, Transport::WebSocket)).transpose()?;
    let _ui = match (&a.serve_ui, &ws) {
        (Some(addr), Some(ws)) => {
            let ws_addr = ws.local_addr().map_err(runtime("listener"))?;
            let ui =
                UiServer::start(addr, a.ui_dir.clone(), ws_addr, Some(a.replays.clone())).map_err(runtime(addr))?;
            eprintln!("console on http://{}/ (websocket {ws_addr})", ui.local_addr());
            Some(ui)
        }
        _ => None,
    };
    let sessions = a.sessions;
    thread::scope(|s| {
        if let Some(ws) = &ws {
            eprintln!("session server (websocket) on {}", ws.local_addr().map(|a| a.to_string()).unwrap_or_default());
            s.spawn(move || ws.serve(sessions));
        }
        tcp.serve(sessions);
    });
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> Result<(), CliError> {
    let refused = |e: ReplayError| match e {
        ReplayError::Io(e) => CliError::Runtime(format!("{}: {e}", a.file.display())),
        e => CliError::Validation(format!("replay refused: {e}")),
    };
    let replay = Replay::load(&a.file).map_err(refused)?;
    let expected = a.scenario.as_deref().map(load_scenario).transpose()?;
    let v = replay.verify(expected.as_ref()).map_err(refused)?;
    if let Some(path) = &a.events_out {
        let mut w = BufWriter::new(File::create(path).map_err(runtime("creating event stream"))?);
        for e in &v.events {
            serde_json::to_writer(&mut w, e).map_err(|e| CliError::Runtime(e.to_string()))?;
            w.write_all(b"\n").map_err(runtime("writing event stream"))?;
        }
        w.flush().map_err(runtime("writing event stream"))?;
    }
    let h = &replay.header;
    println!(
        "scenario {:016x}  seed {}  {} vs {}  build {}",
        h.scenario_hash, h.seed, h.commanders[0], h.commanders[1], h.build_id
    );
    println!(
        "ticks {}  events {}  ledger score {}{}",
        v.ticks,
        v.events.len(),
        v.ledger_score,
        if v.complete { "" } else { "  (episode incomplete)" }
    );
    println!("verdict: {}", v.verdict);
    if v.verdict.is_exact() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("replay {}", v.verdict)))
    }
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let scenario = Arc::new(load_scenario(&a.scenario)?);
    commander(&a.policy)?;
    if a.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let r = run_bench(&scenario, &a.policy, a.ticks, a.workers, a.seed).map_err(CliError::Runtime)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    } else {
        println!("{}: {} worker(s) x {} ticks in {:.3} s", r.scenario, r.workers, r.ticks_per_worker, r.elapsed_secs);
        println!("steps/sec per worker {:.0}", r.ticks_per_sec_per_worker);
        println!("steps/sec aggregate  {:.0}", r.aggregate_ticks_per_sec);
        println!("real-time factor     {:.0}x", r.realtime_factor);
    }
    Ok(())
}
