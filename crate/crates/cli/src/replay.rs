//! Replay files: a byte-exact log of one episode that can be re-simulated
//! and checked against the recorded events, rewards and state hashes.
//!
//! Layout (little-endian): the magic `TCRP`, a format version byte, then a
//! sequence of records `tag:u8 len:u32 payload checksum:u64`. The checksum
//! is the stable 64-bit hash of the tag byte followed by the payload. The
//! first record is the JSON header; tick, hash and end records follow.

use std::fs;
use std::path::Path;

use c2sim_core::env::{reward, termination_of, Env, StepInfo, Termination};
use c2sim_core::hash::StableHasher;
use c2sim_core::scenario::{build_world, parse_scenario, serialize_scenario, RewardScheme, Scenario};
use c2sim_core::sim::{
    advance_tick, CellPos, CombatEvent, Diagnostic, EventKind, EventTarget, Force, Order, OrderKind, UnitId, WorldState,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"TCRP";
pub const FORMAT_VERSION: u8 = 1;
/// State hashes are recorded at every tick that is a multiple of this.
pub const HASH_INTERVAL: u64 = 32;
pub const BUILD_ID: &str = concat!("c2sim ", env!("CARGO_PKG_VERSION"));

const TAG_HEADER: u8 = 1;
const TAG_TICK: u8 = 2;
const TAG_HASH: u8 = 3;
const TAG_END: u8 = 4;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("not a replay file (bad magic)")]
    BadMagic,
    #[error("unsupported replay format version {0} (this build reads {FORMAT_VERSION})")]
    Version(u8),
    #[error("record {index} at byte {offset} is truncated")]
    Truncated { index: usize, offset: usize },
    #[error("record {index} at byte {offset} fails its checksum")]
    Checksum { index: usize, offset: usize },
    #[error("record {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("scenario hash mismatch: replay has {recorded:016x}, scenario is {actual:016x}")]
    ScenarioHash { recorded: u64, actual: u64 },
    #[error("embedded scenario is invalid: {0}")]
    Scenario(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayHeader {
    pub format_version: u8,
    pub scenario_hash: u64,
    pub seed: u64,
    pub reward_scheme: RewardScheme,
    pub build_id: String,
    /// Force whose reward is recorded; its orders were applied first.
    pub controlled: Force,
    /// Names of the two commanders, Blue then Red.
    pub commanders: [String; 2],
    /// The scenario document, so a replay is self-contained.
    pub scenario: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    /// World tick after the step.
    pub tick: u64,
    pub reward: f64,
    /// Orders applied, indexed by `Force::index`.
    pub orders: [Vec<Order>; 2],
    pub events: Vec<CombatEvent>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndRecord {
    pub ticks: u64,
    pub score: f64,
    pub termination: Option<Termination>,
    pub casualties: [u32; 2],
    pub final_hash: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub header: ReplayHeader,
    pub ticks: Vec<TickRecord>,
    /// `(tick, state hash)` checkpoints, tick 0 included.
    pub hashes: Vec<(u64, u64)>,
    /// Absent when the episode was aborted.
    pub end: Option<EndRecord>,
}

/// Collects one episode as it is played.
#[derive(Debug)]
pub struct Recorder {
    replay: Replay,
}

impl Recorder {
    /// Start recording from a freshly reset world.
    pub fn start(
        scenario: &Scenario,
        seed: u64,
        controlled: Force,
        commanders: [String; 2],
        world: &WorldState,
    ) -> Self {
        let header = ReplayHeader {
            format_version: FORMAT_VERSION,
            scenario_hash: scenario.content_hash(),
            seed,
            reward_scheme: scenario.reward_scheme.clone(),
            build_id: BUILD_ID.to_string(),
            controlled,
            commanders,
            scenario: serialize_scenario(scenario),
        };
        Self { replay: Replay { header, ticks: Vec::new(), hashes: vec![(world.tick, world.state_hash())], end: None } }
    }

    /// Start from an environment that was just reset with `seed`.
    pub fn for_env(env: &Env, seed: u64, commanders: [String; 2]) -> Self {
        let world = env.world().expect("environment must be reset before recording");
        Self::start(env.scenario(), seed, env.controlled(), commanders, world)
    }

    pub fn record(&mut self, reward: f64, info: &StepInfo, world: &WorldState) {
        self.replay.ticks.push(TickRecord {
            tick: info.tick,
            reward,
            orders: info.orders.clone(),
            events: info.events.clone(),
        });
        if world.tick.is_multiple_of(HASH_INTERVAL) {
            self.replay.hashes.push((world.tick, world.state_hash()));
        }
    }

    pub fn finish(mut self, env: &Env) -> Replay {
        let world = env.world().expect("reset");
        self.replay.end = Some(EndRecord {
            ticks: world.tick,
            score: env.score(),
            termination: env.termination(),
            casualties: env.casualties(),
            final_hash: world.state_hash(),
        });
        self.replay
    }

    /// The partial recording of an episode that did not finish.
    pub fn abort(self) -> Replay {
        self.replay
    }

    pub fn len(&self) -> usize {
        self.replay.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replay.ticks.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Exact,
    Diverged { tick: u64, reason: String },
}

impl Verdict {
    pub fn is_exact(&self) -> bool {
        matches!(self, Verdict::Exact)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Exact => write!(f, "exact"),
            Verdict::Diverged { tick, reason } => write!(f, "diverged at tick {tick}: {reason}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub verdict: Verdict,
    /// Events regenerated by re-simulation, up to the divergence if any.
    pub events: Vec<CombatEvent>,
    /// Sum of recomputed per-tick rewards for the controlled force.
    pub ledger_score: f64,
    pub ticks: u64,
    pub complete: bool,
}

impl Replay {
    pub fn scenario(&self) -> Result<Scenario, ReplayError> {
        let s = parse_scenario(self.header.scenario.as_bytes()).map_err(|e| ReplayError::Scenario(e.to_string()))?;
        let actual = s.content_hash();
        if actual != self.header.scenario_hash {
            return Err(ReplayError::ScenarioHash { recorded: self.header.scenario_hash, actual });
        }
        Ok(s)
    }

    pub fn event_count(&self) -> usize {
        self.ticks.iter().map(|t| t.events.len()).sum()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.ticks.len() * 64);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        put_record(&mut out, TAG_HEADER, &header);
        let mut hashes = self.hashes.iter().peekable();
        let mut emit_hashes = |out: &mut Vec<u8>, upto: u64| {
            while let Some(&&(tick, hash)) = hashes.peek() {
                if tick > upto {
                    break;
                }
                let mut p = Enc::default();
                p.u64(tick);
                p.u64(hash);
                put_record(out, TAG_HASH, &p.0);
                hashes.next();
            }
        };
        emit_hashes(&mut out, 0);
        for t in &self.ticks {
            put_record(&mut out, TAG_TICK, &encode_tick(t));
            emit_hashes(&mut out, t.tick);
        }
        emit_hashes(&mut out, u64::MAX);
        if let Some(end) = &self.end {
            let mut p = Enc::default();
            p.u64(end.ticks);
            p.f64(end.score);
            p.u8(match end.termination {
                None => 0,
                Some(Termination::ForceDestroyed) => 1,
                Some(Termination::ObjectivesHeld) => 2,
                Some(Termination::MaxTicks) => 3,
            });
            p.u32(end.casualties[0]);
            p.u32(end.casualties[1]);
            p.u64(end.final_hash);
            put_record(&mut out, TAG_END, &p.0);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Replay, ReplayError> {
        if bytes.len() < 5 || &bytes[..4] != MAGIC {
            return Err(ReplayError::BadMagic);
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(ReplayError::Version(bytes[4]));
        }
        let mut pos = 5;
        let mut index = 0;
        let mut header = None;
        let mut ticks = Vec::new();
        let mut hashes = Vec::new();
        let mut end = None;
        while pos < bytes.len() {
            let offset = pos;
            let truncated = ReplayError::Truncated { index, offset };
            if bytes.len() - pos < 5 {
                return Err(truncated);
            }
            let tag = bytes[pos];
            let len = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().expect("4 bytes")) as usize;
            let body_end = pos + 5 + len;
            if bytes.len() < body_end + 8 {
                return Err(truncated);
            }
            let payload = &bytes[pos + 5..body_end];
            let stored = u64::from_le_bytes(bytes[body_end..body_end + 8].try_into().expect("8 bytes"));
            if stored != checksum(tag, payload) {
                return Err(ReplayError::Checksum { index, offset });
            }
            let malformed = |reason: String| ReplayError::Malformed { index, reason };
            if index == 0 && tag != TAG_HEADER {
                return Err(malformed("first record must be the header".into()));
            }
            if end.is_some() {
                return Err(malformed("record after the end record".into()));
            }
            match tag {
                TAG_HEADER if index == 0 => {
                    let h: ReplayHeader = serde_json::from_slice(payload).map_err(|e| malformed(e.to_string()))?;
                    if h.format_version != FORMAT_VERSION {
                        return Err(ReplayError::Version(h.format_version));
                    }
                    header = Some(h);
                }
                TAG_TICK => ticks.push(decode_tick(payload).map_err(malformed)?),
                TAG_HASH => {
                    let mut d = Dec::new(payload);
                    let pair = (d.u64().map_err(malformed)?, d.u64().map_err(malformed)?);
                    d.finish().map_err(malformed)?;
                    hashes.push(pair);
                }
                TAG_END => {
                    let mut d = Dec::new(payload);
                    let parse = |d: &mut Dec| -> Result<EndRecord, String> {
                        let ticks = d.u64()?;
                        let score = d.f64()?;
                        let termination = match d.u8()? {
                            0 => None,
                            1 => Some(Termination::ForceDestroyed),
                            2 => Some(Termination::ObjectivesHeld),
                            3 => Some(Termination::MaxTicks),
                            t => return Err(format!("unknown termination code {t}")),
                        };
                        let casualties = [d.u32()?, d.u32()?];
                        let final_hash = d.u64()?;
                        d.finish()?;
                        Ok(EndRecord { ticks, score, termination, casualties, final_hash })
                    };
                    end = Some(parse(&mut d).map_err(malformed)?);
                }
                t => return Err(malformed(format!("unknown record tag {t}"))),
            }
            pos = body_end + 8;
            index += 1;
        }
        let header = header.ok_or(ReplayError::Truncated { index: 0, offset: 5 })?;
        Ok(Replay { header, ticks, hashes, end })
    }

    pub fn save(&self, path: &Path) -> Result<(), ReplayError> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Replay, ReplayError> {
        Replay::decode(&fs::read(path)?)
    }

    /// Re-simulate from the header's scenario and seed and compare every
    /// tick's events and reward plus every recorded state hash. When
    /// `expected` is given its content hash must match the recording.
    pub fn verify(&self, expected: Option<&Scenario>) -> Result<Verification, ReplayError> {
        let scenario = self.scenario()?;
        if let Some(s) = expected {
            let actual = s.content_hash();
            if actual != self.header.scenario_hash {
                return Err(ReplayError::ScenarioHash { recorded: self.header.scenario_hash, actual });
            }
        }
        if self.header.reward_scheme != scenario.reward_scheme {
            return Err(ReplayError::Malformed {
                index: 0,
                reason: "header reward scheme differs from the scenario's".into(),
            });
        }
        let mut world = build_world(&scenario, self.header.seed).map_err(|e| ReplayError::Scenario(e.to_string()))?;
        let me = self.header.controlled;
        let goal = scenario.goals.of(me);
        let mut out =
            Verification { verdict: Verdict::Exact, events: Vec::new(), ledger_score: 0.0, ticks: 0, complete: false };
        let mut hashes = self.hashes.iter().peekable();
        let diverged = |out: &mut Verification, tick: u64, reason: String| {
            out.verdict = Verdict::Diverged { tick, reason };
        };
        let mut check_hashes = |world: &WorldState, out: &mut Verification| -> bool {
            while let Some(&&(tick, hash)) = hashes.peek() {
                if tick > world.tick {
                    break;
                }
                hashes.next();
                if tick < world.tick {
                    diverged(out, tick, "hash checkpoint does not fall on a recorded tick".into());
                    return false;
                }
                if hash != world.state_hash() {
                    diverged(out, tick, format!("state hash {:016x} != recorded {hash:016x}", world.state_hash()));
                    return false;
                }
            }
            true
        };
        let required: Vec<u64> =
            std::iter::once(0).chain((1..=self.ticks.len() as u64).filter(|t| t % HASH_INTERVAL == 0)).collect();
        let recorded: Vec<u64> = self.hashes.iter().map(|&(t, _)| t).collect();
        if recorded != required {
            let i = required.iter().zip(&recorded).take_while(|(a, b)| a == b).count();
            let at = required.get(i).or(recorded.get(i)).copied().unwrap_or(0);
            diverged(&mut out, at, format!("hash checkpoints must fall on tick 0 and every {HASH_INTERVAL} ticks"));
            return Ok(out);
        }
        if !check_hashes(&world, &mut out) {
            return Ok(out);
        }
        let objectives: Vec<_> = scenario.objective_regions().cloned().collect();
        let mut casualties = [0u32; 2];
        let mut ended = None;
        for rec in &self.ticks {
            let tick = world.tick + 1;
            if ended.is_some() {
                diverged(&mut out, tick, "records continue after the episode ended".into());
                return Ok(out);
            }
            if rec.tick != tick {
                diverged(&mut out, tick, format!("record labelled tick {}", rec.tick));
                return Ok(out);
            }
            let orders: Vec<Order> =
                rec.orders[me.index()].iter().chain(&rec.orders[me.opponent().index()]).cloned().collect();
            let events = match advance_tick(&mut world, &orders) {
                Ok(e) => e,
                Err(e) => {
                    diverged(&mut out, tick, format!("orders rejected: {e}"));
                    return Ok(out);
                }
            };
            let r = reward(&scenario.reward_scheme, &events, &world, me, goal);
            out.events.extend_from_slice(&events);
            out.ticks = world.tick;
            if events != rec.events {
                diverged(&mut out, tick, "event ledger differs".into());
                return Ok(out);
            }
            if r.to_bits() != rec.reward.to_bits() {
                diverged(&mut out, tick, format!("reward {r} != recorded {}", rec.reward));
                return Ok(out);
            }
            out.ledger_score += r;
            for e in events.iter().filter(|e| e.kind == EventKind::Destroyed) {
                casualties[world.units[e.actor.index()].force.index()] += 1;
            }
            ended = termination_of(&world, &objectives, scenario.max_ticks);
            if !check_hashes(&world, &mut out) {
                return Ok(out);
            }
        }
        if hashes.next().is_some() {
            diverged(&mut out, world.tick, "hash checkpoints beyond the last tick".into());
            return Ok(out);
        }
        if let Some(end) = &self.end {
            let reason = if end.ticks != world.tick {
                Some(format!("end record claims {} ticks, replay has {}", end.ticks, world.tick))
            } else if end.final_hash != world.state_hash() {
                Some("final state hash differs".to_string())
            } else if end.score.to_bits() != out.ledger_score.to_bits() {
                Some(format!("episode score {} != ledger sum {}", end.score, out.ledger_score))
            } else if end.casualties != casualties {
                Some(format!("end record claims casualties {:?}, ledger has {casualties:?}", end.casualties))
            } else if end.termination != ended {
                Some(format!("end record claims termination {:?}, replay ends with {ended:?}", end.termination))
            } else {
                None
            };
            if let Some(reason) = reason {
                diverged(&mut out, world.tick, reason);
                return Ok(out);
            }
            out.complete = true;
        }
        Ok(out)
    }
}

fn checksum(tag: u8, payload: &[u8]) -> u64 {
    let mut h = StableHasher::new();
    h.write_u8(tag);
    h.write(payload);
    h.finish()
}

fn put_record(out: &mut Vec<u8>, tag: u8, payload: &[u8]) {
    out.push(tag);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&checksum(tag, payload).to_le_bytes());
}

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i32(&mut self, v: i32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], String> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or_else(|| format!("payload ends at byte {}", self.buf.len()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn i32(&mut self) -> Result<i32, String> {
        Ok(i32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn finish(&self) -> Result<(), String> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(format!("{} trailing bytes", self.buf.len() - self.pos))
        }
    }
}

fn encode_order(p: &mut Enc, o: &Order) {
    p.u32(o.unit.0);
    match o.kind {
        OrderKind::SetSpeed { kmh } => {
            p.u8(0);
            p.f64(kmh);
        }
        OrderKind::SetHeading { radians } => {
            p.u8(1);
            p.f64(radians);
        }
        OrderKind::Move { dx, dy } => {
            p.u8(2);
            p.f64(dx);
            p.f64(dy);
        }
        OrderKind::Fire { target } => {
            p.u8(3);
            p.u32(target.0);
        }
        OrderKind::CallForFire { cell } => {
            p.u8(4);
            p.i32(cell.x);
            p.i32(cell.y);
        }
        OrderKind::HoldFire => p.u8(5),
    }
}

fn decode_order(d: &mut Dec) -> Result<Order, String> {
    let unit = UnitId(d.u32()?);
    let kind = match d.u8()? {
        0 => OrderKind::SetSpeed { kmh: d.f64()? },
        1 => OrderKind::SetHeading { radians: d.f64()? },
        2 => OrderKind::Move { dx: d.f64()?, dy: d.f64()? },
        3 => OrderKind::Fire { target: UnitId(d.u32()?) },
        4 => OrderKind::CallForFire { cell: CellPos::new(d.i32()?, d.i32()?) },
        5 => OrderKind::HoldFire,
        k => return Err(format!("unknown order kind {k}")),
    };
    Ok(Order::new(unit, kind))
}

const DIAGNOSTICS: [Diagnostic; 9] = [
    Diagnostic::UnknownUnit,
    Diagnostic::DeadActor,
    Diagnostic::DeadTarget,
    Diagnostic::OutOfRange,
    Diagnostic::NotVisible,
    Diagnostic::NoAmmo,
    Diagnostic::FriendlyTarget,
    Diagnostic::NoFireSupport,
    Diagnostic::OutOfFuel,
];

const KINDS: [EventKind; 9] = [
    EventKind::Fired,
    EventKind::Hit,
    EventKind::Damaged,
    EventKind::Destroyed,
    EventKind::Crossed,
    EventKind::Retreated,
    EventKind::FireMissionCalled,
    EventKind::FireMissionImpact,
    EventKind::MoveBlocked,
];

fn encode_event(p: &mut Enc, e: &CombatEvent) {
    match e.kind {
        EventKind::Diagnostic(d) => {
            p.u8(100);
            p.u8(DIAGNOSTICS.iter().position(|x| *x == d).expect("listed") as u8);
        }
        k => p.u8(KINDS.iter().position(|x| *x == k).expect("listed") as u8),
    }
    p.u32(e.actor.0);
    match e.target {
        None => p.u8(0),
        Some(EventTarget::Unit(u)) => {
            p.u8(1);
            p.u32(u.0);
        }
        Some(EventTarget::Cell(c)) => {
            p.u8(2);
            p.i32(c.x);
            p.i32(c.y);
        }
    }
    match e.amount {
        None => p.u8(0),
        Some(a) => {
            p.u8(1);
            p.u32(a);
        }
    }
    p.u64(e.tick);
}

fn decode_event(d: &mut Dec) -> Result<CombatEvent, String> {
    let kind = match d.u8()? {
        100 => {
            let i = d.u8()? as usize;
            EventKind::Diagnostic(*DIAGNOSTICS.get(i).ok_or_else(|| format!("unknown diagnostic {i}"))?)
        }
        i => *KINDS.get(i as usize).ok_or_else(|| format!("unknown event kind {i}"))?,
    };
    let actor = UnitId(d.u32()?);
    let target = match d.u8()? {
        0 => None,
        1 => Some(EventTarget::Unit(UnitId(d.u32()?))),
        2 => Some(EventTarget::Cell(CellPos::new(d.i32()?, d.i32()?))),
        t => return Err(format!("unknown event target tag {t}")),
    };
    let amount = match d.u8()? {
        0 => None,
        1 => Some(d.u32()?),
        t => return Err(format!("unknown amount tag {t}")),
    };
    Ok(CombatEvent { kind, actor, target, amount, tick: d.u64()? })
}

fn encode_tick(t: &TickRecord) -> Vec<u8> {
    let mut p = Enc::default();
    p.u64(t.tick);
    p.f64(t.reward);
    for list in &t.orders {
        p.u32(list.len() as u32);
        list.iter().for_each(|o| encode_order(&mut p, o));
    }
    p.u32(t.events.len() as u32);
    t.events.iter().for_each(|e| encode_event(&mut p, e));
    p.0
}

fn decode_tick(payload: &[u8]) -> Result<TickRecord, String> {
    let mut d = Dec::new(payload);
    let tick = d.u64()?;
    let reward = d.f64()?;
    let mut orders: [Vec<Order>; 2] = Default::default();
    for list in &mut orders {
        let n = d.u32()? as usize;
        *list = (0..n).map(|_| decode_order(&mut d)).collect::<Result<_, _>>()?;
    }
    let n = d.u32()? as usize;
    let events = (0..n).map(|_| decode_event(&mut d)).collect::<Result<_, _>>()?;
    d.finish()?;
    Ok(TickRecord { tick, reward, orders, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use c2sim_core::commanders::by_name;
    use c2sim_core::env::EnvConfig;
    use c2sim_core::scenario::builtin_skirmish;
    use c2sim_core::train::run_episode_observed;
    use std::sync::Arc;

    fn recorded(seed: u64) -> Replay {
        let mut env = Env::new(Arc::new(builtin_skirmish()), EnvConfig::default()).unwrap();
        let mut policy = by_name("random").unwrap();
        env.reset(seed).unwrap();
        let mut rec = Some(Recorder::for_env(&env, seed, ["random".into(), env.opponent_name()]));
        run_episode_observed(&mut env, policy.as_mut(), seed, |env, r| {
            rec.as_mut().unwrap().record(r.reward, &r.info, env.world().unwrap());
        })
        .unwrap();
        rec.take().unwrap().finish(&env)
    }

    #[test]
    fn encode_decode_round_trips() {
        let r = recorded(3);
        assert!(!r.ticks.is_empty());
        let back = Replay::decode(&r.encode()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn record_then_verify_is_exact() {
        let r = recorded(5);
        let v = r.verify(None).unwrap();
        assert_eq!(v.verdict, Verdict::Exact);
        assert!(v.complete);
        assert_eq!(v.ledger_score, r.end.unwrap().score);
        assert_eq!(v.events.len(), r.event_count());
    }

    #[test]
    fn hash_points_fall_on_interval() {
        let r = recorded(1);
        assert_eq!(r.hashes[0].0, 0);
        assert!(r.hashes.iter().all(|(t, _)| t % HASH_INTERVAL == 0));
    }

    #[test]
    fn zero_tick_episode_is_exact_and_empty() {
        let s = builtin_skirmish();
        let world = build_world(&s, 9).unwrap();
        let mut r = Recorder::start(&s, 9, Force::Blue, ["x".into(), "y".into()], &world).abort();
        r.end = Some(EndRecord {
            ticks: 0,
            score: 0.0,
            termination: None,
            casualties: [0, 0],
            final_hash: world.state_hash(),
        });
        let r = Replay::decode(&r.encode()).unwrap();
        let v = r.verify(Some(&s)).unwrap();
        assert_eq!(v.verdict, Verdict::Exact);
        assert!(v.events.is_empty() && v.complete);
    }

    #[test]
    fn rejects_bad_magic_version_and_checksum() {
        let bytes = recorded(2).encode();
        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(matches!(Replay::decode(&b), Err(ReplayError::BadMagic)));
        let mut b = bytes.clone();
        b[4] = 9;
        assert!(matches!(Replay::decode(&b), Err(ReplayError::Version(9))));
        let mut b = bytes.clone();
        let last = b.len() - 20;
        b[last] ^= 0x40;
        assert!(matches!(Replay::decode(&b), Err(ReplayError::Checksum { .. })));
        assert!(matches!(Replay::decode(&bytes[..bytes.len() - 3]), Err(ReplayError::Truncated { .. })));
    }

    #[test]
    fn other_scenario_is_refused() {
        let r = recorded(4);
        let mut other = builtin_skirmish();
        other.max_ticks += 1;
        assert!(matches!(r.verify(Some(&other)), Err(ReplayError::ScenarioHash { .. })));
    }

    #[test]
    fn tampered_reward_is_reported_at_its_tick() {
        let mut r = recorded(6);
        r.ticks[3].reward += 1e-9;
        let v = Replay::decode(&r.encode()).unwrap().verify(None).unwrap();
        assert!(matches!(v.verdict, Verdict::Diverged { tick: 4, .. }), "{}", v.verdict);
    }
}
