//! Human-play session server. One client commands one force turn by turn
//! against a built-in opponent, over newline-delimited JSON on a TCP socket
//! or over WebSocket text frames. Every message is a JSON object tagged by
//! `kind`.

use std::collections::BTreeSet;
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use c2sim_core::commanders::by_name;
use c2sim_core::env::{
    encode_vector_obs, ActionSet, DiscreteAction, Env, EnvConfig, EnvError, ForceView, FEATURE_NAMES,
};
use c2sim_core::scenario::Scenario;
use c2sim_core::sim::{CombatEvent, EventKind, EventTarget, Force, Pos, Region, UnitClass, UnitId};
use c2sim_core::train::summarize;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tungstenite::{Message, WebSocket};

use crate::replay::{Recorder, Replay};
use crate::report::ReportRow;

pub const PROTOCOL_VERSION: u32 = 1;
const MAX_LINE: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// The tick waits until the client's orders arrive.
    TurnBased,
    /// Orders not received within the deadline count as no orders.
    RealTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub cell_km: f64,
    /// One string per row, `.` open, `#` impassable, `=` crossing.
    pub terrain: Vec<String>,
    pub regions: Vec<Region>,
    pub goal: Pos,
    pub max_ticks: u64,
    pub reward_scheme: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol_version: u32,
    pub scenario: ScenarioSummary,
    pub side: Force,
    pub opponent: String,
    pub tick_seconds: f64,
    pub cadence: Cadence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_ms: Option<u64>,
    pub seed: u64,
    pub actions: Vec<String>,
    pub features: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OwnUnit {
    pub id: UnitId,
    pub class: UnitClass,
    pub position: Pos,
    pub heading: f64,
    pub speed: f64,
    pub speed_max: f64,
    pub strength: u32,
    pub strength_max: u32,
    pub ammo: u32,
    pub ammo_max: u32,
    pub fuel_fraction: f64,
    pub weapon_range_km: f64,
    pub sensor_range_km: f64,
    /// The unit's vector observation, ordered as `hello.features`; empty
    /// once destroyed.
    pub features: Vec<f64>,
}

/// What the client may know about a perceived enemy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub id: UnitId,
    pub class: UnitClass,
    pub position: Pos,
    pub heading: f64,
    pub strength: u32,
    pub strength_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub tick: u64,
    pub score: f64,
    pub units: Vec<OwnUnit>,
    pub contacts: Vec<Contact>,
    /// Events of the previous tick, limited to what the side could observe.
    pub events: Vec<CombatEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepAck {
    pub tick: u64,
    pub reward: f64,
    pub score: f64,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEnd {
    pub report: ReportRow,
    pub event_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(Hello),
    State(State),
    StepAck(StepAck),
    EpisodeEnd(EpisodeEnd),
    Error(ErrorBody),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitOrder {
    pub unit: UnitId,
    pub action: DiscreteAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    /// Orders for the current tick; units left out idle. `tick`, when
    /// present, must equal the tick of the last `state`.
    Orders {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tick: Option<u64>,
        actions: Vec<UnitOrder>,
    },
}

pub fn error_message(message: impl Into<String>) -> ServerMessage {
    ServerMessage::Error(ErrorBody { message: message.into() })
}

pub fn summary(scenario: &Scenario, side: Force, env: &Env) -> ScenarioSummary {
    let terrain = env.routes().terrain();
    ScenarioSummary {
        name: scenario.name.clone(),
        width: terrain.width(),
        height: terrain.height(),
        cell_km: terrain.cell_km(),
        terrain: terrain.to_rows(),
        regions: scenario.regions.clone(),
        goal: scenario.goals.of(side),
        max_ticks: scenario.max_ticks,
        reward_scheme: scenario.reward_scheme.name().to_string(),
    }
}

/// Keep the events a side could observe and blank references to enemies it
/// does not perceive.
pub fn observed_events(view: &ForceView, events: &[CombatEvent]) -> Vec<CombatEvent> {
    let own = |id: UnitId| view.own_units().any(|u| u.id == id);
    let known = |id: UnitId| own(id) || view.perceives(id);
    events
        .iter()
        .filter(|e| {
            if own(e.actor) {
                return true;
            }
            let internal = e.is_diagnostic() || matches!(e.kind, EventKind::MoveBlocked | EventKind::FireMissionCalled);
            // Fire from an unseen enemy shows up only as the victim's own
            // Hit and Damaged events, with the shooter blanked below.
            !internal && view.perceives(e.actor)
        })
        .map(|e| {
            let mut e = *e;
            if let Some(EventTarget::Unit(t)) = e.target {
                if !known(t) {
                    e.target = None;
                }
            }
            e
        })
        .collect()
}

/// The `state` payload for the side owning `view`.
pub fn state_from_view(view: &ForceView, score: f64) -> State {
    let goal = view.goal();
    let units = view
        .own_units()
        .map(|u| OwnUnit {
            id: u.id,
            class: u.class,
            position: u.position,
            heading: u.heading,
            speed: u.speed,
            speed_max: u.speed_max,
            strength: u.strength,
            strength_max: u.strength_max,
            ammo: u.ammo,
            ammo_max: u.ammo_max,
            fuel_fraction: if u.fuel_capacity > 0.0 { (u.fuel_consumed / u.fuel_capacity).min(1.0) } else { 0.0 },
            weapon_range_km: u.weapon_range,
            sensor_range_km: u.sensor_range,
            features: if u.alive() {
                encode_vector_obs(view, u.id, goal).map(|f| f.to_vec()).unwrap_or_default()
            } else {
                Vec::new()
            },
        })
        .collect();
    let contacts = view
        .enemies()
        .map(|e| Contact {
            id: e.id,
            class: e.class,
            position: e.position,
            heading: e.heading,
            strength: e.strength,
            strength_max: e.strength_max,
        })
        .collect();
    let events = observed_events(view, view.last_events());
    State { tick: view.tick(), score, units, contacts, events }
}

/// Validate a client's orders against the side's living units.
pub fn actions_from(view: &ForceView, current_tick: u64, msg: ClientMessage) -> Result<ActionSet, String> {
    let ClientMessage::Orders { tick, actions } = msg;
    if let Some(t) = tick {
        if t != current_tick {
            return Err(format!("orders are for tick {t} but the current tick is {current_tick}"));
        }
    }
    let mut seen = BTreeSet::new();
    for o in &actions {
        match view.own_units().find(|u| u.id == o.unit) {
            None if view.perceives(o.unit) => return Err(format!("unit {} is an enemy unit", o.unit.0)),
            None => return Err(format!("unit {} is not one of your units", o.unit.0)),
            Some(u) if !u.alive() => return Err(format!("unit {} is destroyed", o.unit.0)),
            Some(_) => {}
        }
        if !seen.insert(o.unit) {
            return Err(format!("unit {} is ordered twice", o.unit.0));
        }
    }
    Ok(ActionSet::Discrete(actions.into_iter().map(|o| (o.unit, o.action)).collect()))
}

pub enum Incoming {
    Text(String),
    Timeout,
    Closed,
}

/// A duplex message channel to one client.
pub trait Channel {
    fn send(&mut self, msg: &ServerMessage) -> io::Result<()>;
    /// Next text message; `None` waits indefinitely.
    fn recv(&mut self, timeout: Option<Duration>) -> io::Result<Incoming>;
    fn close(&mut self);
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

/// Newline-delimited JSON over a TCP stream.
pub struct NdjsonChannel {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    partial: Vec<u8>,
}

impl NdjsonChannel {
    pub fn new(stream: TcpStream) -> io::Result<Self> {
        let writer = stream.try_clone()?;
        Ok(Self { reader: BufReader::new(stream), writer, partial: Vec::new() })
    }
}

impl Channel for NdjsonChannel {
    fn send(&mut self, msg: &ServerMessage) -> io::Result<()> {
        let mut line = serde_json::to_vec(msg).map_err(io::Error::other)?;
        line.push(b'\n');
        self.writer.write_all(&line)?;
        self.writer.flush()
    }

    fn recv(&mut self, timeout: Option<Duration>) -> io::Result<Incoming> {
        self.reader.get_ref().set_read_timeout(timeout)?;
        loop {
            match self.reader.read_until(b'\n', &mut self.partial) {
                Ok(0) => return Ok(Incoming::Closed),
                Ok(_) if self.partial.ends_with(b"\n") => {
                    let line = std::mem::take(&mut self.partial);
                    let text = String::from_utf8_lossy(&line).trim().to_string();
                    if text.is_empty() {
                        continue;
                    }
                    return Ok(Incoming::Text(text));
                }
                Ok(_) if self.partial.len() > MAX_LINE => {
                    return Err(io::Error::new(ErrorKind::InvalidData, "message exceeds 1 MiB"));
                }
                Ok(_) => continue,
                Err(e) if is_timeout(&e) => return Ok(Incoming::Timeout),
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) if matches!(e.kind(), ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted) => {
                    return Ok(Incoming::Closed)
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn close(&mut self) {
        let _ = self.writer.shutdown(std::net::Shutdown::Both);
    }
}

/// JSON text frames over a WebSocket.
pub struct WsChannel {
    ws: WebSocket<TcpStream>,
}

impl WsChannel {
    /// Perform the server side of the opening handshake.
    pub fn accept(stream: TcpStream) -> io::Result<Self> {
        stream.set_read_timeout(Some(Duration::from_secs(10)))?;
        let ws = tungstenite::accept(stream).map_err(|e| io::Error::new(ErrorKind::InvalidData, e.to_string()))?;
        Ok(Self { ws })
    }
}

fn ws_error(e: tungstenite::Error) -> io::Result<Incoming> {
    use tungstenite::Error as E;
    match e {
        E::Io(e) if is_timeout(&e) => Ok(Incoming::Timeout),
        E::ConnectionClosed | E::AlreadyClosed | E::Protocol(_) => Ok(Incoming::Closed),
        E::Io(e)
            if matches!(
                e.kind(),
                ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted | ErrorKind::UnexpectedEof
            ) =>
        {
            Ok(Incoming::Closed)
        }
        E::Io(e) => Err(e),
        e => Err(io::Error::other(e.to_string())),
    }
}

impl Channel for WsChannel {
    fn send(&mut self, msg: &ServerMessage) -> io::Result<()> {
        let text = serde_json::to_string(msg).map_err(io::Error::other)?;
        self.ws.send(Message::text(text)).map_err(|e| io::Error::other(e.to_string()))
    }

    fn recv(&mut self, timeout: Option<Duration>) -> io::Result<Incoming> {
        self.ws.get_ref().set_read_timeout(timeout)?;
        loop {
            match self.ws.read() {
                Ok(Message::Text(t)) => return Ok(Incoming::Text(t.to_string())),
                Ok(Message::Binary(b)) => return Ok(Incoming::Text(String::from_utf8_lossy(&b).into_owned())),
                Ok(Message::Close(_)) => return Ok(Incoming::Closed),
                Ok(_) => continue,
                Err(e) => return ws_error(e),
            }
        }
    }

    fn close(&mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub scenario: Arc<Scenario>,
    pub side: Force,
    /// Commander for the other side; `None` uses the scenario's Red
    /// controller (Blue side only).
    pub opponent: Option<String>,
    pub seed: u64,
    /// Real-time cadence with this per-tick deadline; `None` is turn-based.
    pub deadline: Option<Duration>,
    pub replay_dir: Option<PathBuf>,
}

impl SessionConfig {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        Self { scenario, side: Force::Blue, opponent: None, seed: 0, deadline: None, replay_dir: None }
    }

    pub fn environment(&self) -> Result<Env, SessionError> {
        let config = EnvConfig { controlled: self.side, ..EnvConfig::default() };
        let env = Env::new(self.scenario.clone(), config)?;
        match &self.opponent {
            Some(name) => {
                let c = by_name(name).ok_or_else(|| SessionError::Config(format!("unknown opponent {name:?}")))?;
                Ok(env.with_opponent(Some(c)))
            }
            None if self.side == Force::Red => {
                Err(SessionError::Config("playing Red needs an explicit opponent".into()))
            }
            None => Ok(env),
        }
    }
}

#[derive(Debug)]
pub enum SessionOutcome {
    Finished {
        report: ReportRow,
        replay: Replay,
        replay_path: Option<PathBuf>,
    },
    /// The client left before the episode ended.
    Aborted {
        tick: u64,
        replay: Replay,
    },
}

/// Play one episode with the client on `channel`.
pub fn run_session(
    channel: &mut dyn Channel,
    config: &SessionConfig,
    id: usize,
) -> Result<SessionOutcome, SessionError> {
    let mut env = config.environment()?;
    let seed = config.seed.wrapping_add(id as u64);
    env.reset(seed)?;
    let side = config.side;
    let opponent = env.opponent_name();
    let mut names = [String::new(), String::new()];
    names[side.index()] = "human".into();
    names[side.opponent().index()] = opponent.clone();
    let mut recorder = Recorder::for_env(&env, seed, names);
    channel.send(&ServerMessage::Hello(Hello {
        protocol_version: PROTOCOL_VERSION,
        scenario: summary(&config.scenario, side, &env),
        side,
        opponent,
        tick_seconds: config.scenario.tick_seconds,
        cadence: if config.deadline.is_some() { Cadence::RealTime } else { Cadence::TurnBased },
        deadline_ms: config.deadline.map(|d| d.as_millis() as u64),
        seed,
        actions: DiscreteAction::ALL.iter().map(|a| a.name().to_string()).collect(),
        features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
    }))?;

    while !env.is_done() {
        let tick = env.world().expect("reset").tick;
        channel.send(&ServerMessage::State(state_from_view(&env.view()?, env.score())))?;
        let started = Instant::now();
        let actions = loop {
            let remaining = config.deadline.map(|d| d.saturating_sub(started.elapsed()));
            if remaining == Some(Duration::ZERO) {
                break ActionSet::empty();
            }
            match channel.recv(remaining)? {
                Incoming::Timeout if config.deadline.is_some() => break ActionSet::empty(),
                Incoming::Timeout => continue,
                Incoming::Closed => {
                    log::warn!("session {id}: client disconnected at tick {tick}; episode aborted");
                    return Ok(SessionOutcome::Aborted { tick, replay: recorder.abort() });
                }
                Incoming::Text(text) => {
                    let view = env.view()?;
                    let parsed =
                        serde_json::from_str::<ClientMessage>(&text).map_err(|e| format!("malformed message: {e}"));
                    match parsed.and_then(|m| actions_from(&view, tick, m)) {
                        Ok(a) => break a,
                        Err(message) => {
                            log::debug!("session {id}: rejected message: {message}");
                            channel.send(&error_message(message))?;
                        }
                    }
                }
            }
        };
        let result = env.step(&actions)?;
        recorder.record(result.reward, &result.info, env.world().expect("reset"));
        channel.send(&ServerMessage::StepAck(StepAck {
            tick: result.info.tick,
            reward: result.reward,
            score: result.info.score,
            done: result.done,
        }))?;
    }

    let rollout = summarize(&env, seed).expect("episode finished");
    let report = ReportRow::new(id, &rollout);
    let replay = recorder.finish(&env);
    let replay_path = match &config.replay_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("session-{id}-seed{seed}.tcrp"));
            replay.save(&path).map_err(|e| SessionError::Io(io::Error::other(e.to_string())))?;
            Some(path)
        }
        None => None,
    };
    channel.send(&ServerMessage::EpisodeEnd(EpisodeEnd {
        report: report.clone(),
        event_count: replay.event_count(),
        replay: replay_path.as_ref().map(|p| p.display().to_string()),
    }))?;
    channel.close();
    log::info!("session {id}: episode finished, score {}", report.total_reward);
    Ok(SessionOutcome::Finished { report, replay, replay_path })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transport {
    Ndjson,
    WebSocket,
}

/// Accepts clients on one address and runs each session on its own thread.
pub struct SessionServer {
    listener: TcpListener,
    transport: Transport,
    config: SessionConfig,
}

impl SessionServer {
    pub fn bind(addr: impl ToSocketAddrs, transport: Transport, config: SessionConfig) -> Result<Self, SessionError> {
        config.environment()?;
        Ok(Self { listener: TcpListener::bind(addr)?, transport, config })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serve until `max_sessions` connections were accepted (forever when
    /// `None`), then wait for the running sessions and return their results
    /// in connection order.
    pub fn serve(&self, max_sessions: Option<usize>) -> Vec<Result<SessionOutcome, SessionError>> {
        let mut handles: Vec<JoinHandle<Result<SessionOutcome, SessionError>>> = Vec::new();
        let mut id = 0;
        while max_sessions.is_none_or(|m| id < m) {
            let stream = match self.listener.accept() {
                Ok((s, peer)) => {
                    log::info!("session {id}: client {peer} connected");
                    s
                }
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let config = self.config.clone();
            let transport = self.transport;
            let session = id;
            handles.push(thread::spawn(move || {
                let _ = stream.set_nodelay(true);
                let mut channel: Box<dyn Channel> = match transport {
                    Transport::Ndjson => Box::new(NdjsonChannel::new(stream)?),
                    Transport::WebSocket => Box::new(WsChannel::accept(stream)?),
                };
                let outcome = run_session(channel.as_mut(), &config, session);
                if let Err(e) = &outcome {
                    log::warn!("session {session} failed: {e}");
                }
                outcome
            }));
            id += 1;
            if max_sessions.is_none() {
                handles.retain(|h| !h.is_finished());
            }
        }
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(SessionError::Config("session thread panicked".into()))))
            .collect()
    }
}
