//! The edge's single-threaded control loop state.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::arbiter::{ArbiterParams, SpeakerArbiter};
use super::record::{CommandRecord, RecordStatus, Source};
use crate::nav::{inflate, plan_route, MapError, NavParams, OccupancyGrid, Route, RouteError};
use crate::pose::Pose;
use crate::proto::{
    decode_frame, encode_frame, Arq, ArqAction, ArqConfig, ArqError, Command, Liveness, MsgType, ProtocolEvent,
    StatusPhase,
};
use crate::transport::Endpoint;
use crate::Millis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeConfig {
    pub protocol: ArqConfig,
    pub nav: NavParams,
    pub arbiter: ArbiterParams,
    pub odom_relay_interval_ms: u64,
    /// Records listed in snapshots.
    pub history_limit: usize,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            protocol: ArqConfig::default(),
            nav: NavParams::default(),
            arbiter: ArbiterParams::default(),
            odom_relay_interval_ms: 200,
            history_limit: 100,
        }
    }
}

impl EdgeConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.protocol.validate().map_err(|e| format!("protocol: {e}"))?;
        self.nav.validate().map_err(|e| format!("nav: {e}"))?;
        self.arbiter.validate().map_err(|e| format!("arbiter: {e}"))?;
        if self.history_limit == 0 {
            return Err("history_limit must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Manual,
    Auto,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Manual => "manual",
            Mode::Auto => "auto",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EdgeError {
    #[error("operation requires {required} mode")]
    WrongMode { required: Mode },
    #[error("avatar session is dead")]
    SessionDead,
    #[error("malformed command: {0}")]
    Malformed(String),
    #[error("no pose received from the avatar yet")]
    NoPose,
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error("protocol error: {0}")]
    Protocol(#[from] ArqError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Odom,
    Command,
    Session,
    Mode,
    Speaker,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Odom => "odom",
            EventKind::Command => "command",
            EventKind::Session => "session",
            EventKind::Mode => "mode",
            EventKind::Speaker => "speaker",
        }
    }
}

/// One entry of the live event stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeEvent {
    pub id: u64,
    pub t_ms: Millis,
    pub kind: EventKind,
    pub data: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalPlan {
    pub id_first: u64,
    pub count: usize,
    pub start: Pose,
    pub route: Route,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeChange {
    pub previous: Mode,
    pub cancelled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub state: Liveness,
    pub rtt_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseView {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub age_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerView {
    pub angle_deg: f64,
    pub age_ms: u64,
}

/// Point-in-time view served at `/api/v1/state`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeSnapshot {
    pub mode: Mode,
    pub session: SessionView,
    pub pose: Option<PoseView>,
    pub active: Option<CommandRecord>,
    pub queue: Vec<CommandRecord>,
    pub speaker: Option<SpeakerView>,
    pub media: &'static str,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EdgeStats {
    pub cmd_frames_sent: u64,
    pub decode_errors: u64,
    pub unknown_seq: u64,
}

pub struct EdgeCore {
    config: EdgeConfig,
    mode: Mode,
    arq: Arq,
    peer: Option<Endpoint>,
    sessions_seen: u32,
    last_session_event: Option<serde_json::Value>,
    records: Vec<CommandRecord>,
    queue: VecDeque<u64>,
    active: Option<u64>,
    emergency: Option<u64>,
    by_seq: HashMap<u32, u64>,
    pose: Option<(Pose, Millis)>,
    last_relay: Option<Millis>,
    speaker: Option<(f64, Millis)>,
    arbiter: SpeakerArbiter,
    raw: OccupancyGrid,
    inflated: OccupancyGrid,
    map_text: String,
    outbound: Vec<(Endpoint, Vec<u8>)>,
    events: Vec<EdgeEvent>,
    next_event_id: u64,
    stats: EdgeStats,
}

impl EdgeCore {
    pub fn new(config: EdgeConfig, map_text: String) -> Result<Self, MapError> {
        let raw = OccupancyGrid::from_map_json(&map_text)?;
        let inflated = inflate(&raw, config.nav.inflation_radius_m);
        Ok(Self {
            arq: Arq::edge(config.protocol.clone()),
            arbiter: SpeakerArbiter::new(config.arbiter.clone()),
            config,
            mode: Mode::Manual,
            peer: None,
            sessions_seen: 0,
            last_session_event: None,
            records: Vec::new(),
            queue: VecDeque::new(),
            active: None,
            emergency: None,
            by_seq: HashMap::new(),
            pose: None,
            last_relay: None,
            speaker: None,
            raw,
            inflated,
            map_text,
            outbound: Vec::new(),
            events: Vec::new(),
            next_event_id: 1,
            stats: EdgeStats::default(),
        })
    }

    pub fn config(&self) -> &EdgeConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn liveness(&self) -> Liveness {
        self.arq.liveness()
    }

    pub fn arq(&self) -> &Arq {
        &self.arq
    }

    pub fn peer(&self) -> Option<&Endpoint> {
        self.peer.as_ref()
    }

    pub fn pose(&self) -> Option<(Pose, Millis)> {
        self.pose
    }

    pub fn map_text(&self) -> &str {
        &self.map_text
    }

    pub fn raw_grid(&self) -> &OccupancyGrid {
        &self.raw
    }

    pub fn inflated_grid(&self) -> &OccupancyGrid {
        &self.inflated
    }

    pub fn records(&self) -> &[CommandRecord] {
        &self.records
    }

    pub fn record(&self, id: u64) -> Option<&CommandRecord> {
        id.checked_sub(1).and_then(|idx| self.records.get(idx as usize))
    }

    pub fn queued_len(&self) -> usize {
        self.queue.len()
    }

    /// True when nothing is queued or in flight.
    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.active.is_none() && self.emergency.is_none()
    }

    pub fn stats(&self) -> EdgeStats {
        self.stats
    }

    pub fn take_outbound(&mut self) -> Vec<(Endpoint, Vec<u8>)> {
        std::mem::take(&mut self.outbound)
    }

    pub fn take_events(&mut self) -> Vec<EdgeEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn handle_datagram(&mut self, bytes: &[u8], from: Endpoint, now: Millis) {
        let frame = match decode_frame(bytes) {
            Ok(frame) => frame,
            Err(e) => {
                self.stats.decode_errors += 1;
                log::debug!("edge dropping datagram from {from}: {e}");
                return;
            }
        };
        if frame.msg_type == MsgType::Hello {
            self.peer = Some(from);
        }
        let actions = self.arq.handle_frame(&frame, now);
        self.perform(actions, now);
        self.dispatch_step(now);
    }

    pub fn tick(&mut self, now: Millis) {
        let actions = self.arq.tick(now);
        self.perform(actions, now);
        self.dispatch_step(now);
    }

    pub fn set_mode(&mut self, mode: Mode, now: Millis) -> ModeChange {
        let previous = self.mode;
        self.mode = mode;
        let cancelled = if mode == previous {
            0
        } else {
            let other = match mode {
                Mode::Manual => Source::Planner,
                Mode::Auto => Source::Master,
            };
            self.cancel_queued(|r| r.source == other, "mode changed", now)
        };
        self.emit(now, EventKind::Mode, json!({ "mode": mode, "previous": previous, "cancelled": cancelled }));
        ModeChange { previous, cancelled }
    }

    pub fn submit_manual(&mut self, cmd: Command, now: Millis) -> Result<u64, EdgeError> {
        cmd.validate().map_err(|e| EdgeError::Malformed(e.to_string()))?;
        if self.mode != Mode::Manual {
            return Err(EdgeError::WrongMode { required: Mode::Manual });
        }
        self.require_session()?;
        let id = self.enqueue(Source::Master, cmd, now);
        self.dispatch_step(now);
        Ok(id)
    }

    /// Plans from the latest reported pose to (x, y) and queues the result,
    /// replacing whatever the previous goal still had queued.
    pub fn submit_goal(&mut self, x: f64, y: f64, now: Millis) -> Result<GoalPlan, EdgeError> {
        if self.mode != Mode::Auto {
            return Err(EdgeError::WrongMode { required: Mode::Auto });
        }
        self.require_session()?;
        let (start, _) = self.pose.ok_or(EdgeError::NoPose)?;
        let route = plan_route(&self.inflated, &start, x, y, &self.config.nav)?;
        self.cancel_queued(|r| r.source == Source::Planner, "superseded", now);
        let id_first = self.records.len() as u64 + 1;
        for cmd in &route.commands {
            self.enqueue(Source::Planner, *cmd, now);
        }
        let count = route.commands.len();
        self.dispatch_step(now);
        Ok(GoalPlan { id_first, count, start, route })
    }

    /// Sends stop-drive ahead of everything else and clears the queue.
    pub fn emergency_stop(&mut self, now: Millis) -> Result<u64, EdgeError> {
        self.require_session()?;
        self.cancel_queued(|_| true, "emergency stop", now);
        let id = self.enqueue(Source::Emergency, Command::StopDrive, now);
        self.queue.retain(|&q| q != id);
        let (actions, superseded) = match self.arq.send_command_preempting(Command::StopDrive, now) {
            Ok(sent) => sent,
            Err(e) => {
                self.transition(id, RecordStatus::Cancelled, Some(e.to_string()), now);
                return Err(e.into());
            }
        };
        if let Some(old) = superseded.and_then(|seq| self.by_seq.get(&seq).copied()) {
            // never acked, so nothing will ever report on it
            self.transition(old, RecordStatus::Failed, Some("preempted".into()), now);
        }
        self.mark_dispatched(id, now);
        self.emergency = Some(id);
        self.perform(actions, now);
        Ok(id)
    }

    pub fn snapshot(&self, now: Millis) -> EdgeSnapshot {
        let active = self.active.or(self.emergency).and_then(|id| self.record(id)).cloned();
        let skip = self.records.len().saturating_sub(self.config.history_limit);
        EdgeSnapshot {
            mode: self.mode,
            session: SessionView { state: self.arq.liveness(), rtt_ms: self.arq.rtt_ms() },
            pose: self.pose.map(|(p, t)| PoseView { x: p.x, y: p.y, theta: p.theta, age_ms: now.saturating_sub(t) }),
            active,
            queue: self.records[skip..].to_vec(),
            speaker: self.speaker.map(|(a, t)| SpeakerView { angle_deg: a, age_ms: now.saturating_sub(t) }),
            media: "external",
        }
    }

    fn require_session(&self) -> Result<(), EdgeError> {
        if self.arq.liveness() == Liveness::Dead || self.arq.session_id().is_none() {
            Err(EdgeError::SessionDead)
        } else {
            Ok(())
        }
    }

    fn enqueue(&mut self, source: Source, cmd: Command, now: Millis) -> u64 {
        let id = self.records.len() as u64 + 1;
        self.records.push(CommandRecord::new(id, source, cmd, now));
        self.queue.push_back(id);
        self.emit_record(id, now);
        id
    }

    fn cancel_queued(&mut self, pred: impl Fn(&CommandRecord) -> bool, reason: &str, now: Millis) -> usize {
        let doomed: Vec<u64> = self.queue.iter().copied().filter(|&id| pred(&self.records[id as usize - 1])).collect();
        for &id in &doomed {
            self.transition(id, RecordStatus::Cancelled, Some(reason.to_string()), now);
        }
        doomed.len()
    }

    fn record_mut(&mut self, id: u64) -> &mut CommandRecord {
        &mut self.records[id as usize - 1]
    }

    /// Applies one lifecycle step, emitting it on the event stream.
    fn transition(&mut self, id: u64, status: RecordStatus, detail: Option<String>, now: Millis) -> bool {
        if !self.record_mut(id).advance(status, detail, now) {
            log::debug!("record {id}: ignoring {:?} -> {status:?}", self.records[id as usize - 1].status);
            return false;
        }
        if status == RecordStatus::Cancelled {
            self.queue.retain(|&q| q != id);
        }
        if status.is_terminal() {
            if self.active == Some(id) {
                self.active = None;
            }
            if self.emergency == Some(id) {
                self.emergency = None;
            }
        }
        self.emit_record(id, now);
        true
    }

    fn mark_dispatched(&mut self, id: u64, now: Millis) {
        let seq = self.arq.outstanding().map(|o| o.seq).expect("command just sent");
        self.record_mut(id).seq = Some(seq);
        self.by_seq.insert(seq, id);
        self.transition(id, RecordStatus::Dispatched, None, now);
    }

    /// Hands the oldest queued record to the protocol when the gate is open.
    fn dispatch_step(&mut self, now: Millis) {
        if self.arq.liveness() != Liveness::Alive
            || self.active.is_some()
            || self.emergency.is_some()
            || self.arq.outstanding().is_some()
        {
            return;
        }
        let Some(&id) = self.queue.front() else { return };
        let cmd = self.records[id as usize - 1].command;
        match self.arq.send_command(cmd, now) {
            Ok(actions) => {
                self.queue.pop_front();
                self.mark_dispatched(id, now);
                self.active = Some(id);
                self.perform(actions, now);
            }
            Err(e) => log::warn!("dispatch of record {id} deferred: {e}"),
        }
    }

    fn in_flight_ids(&self) -> Vec<u64> {
        self.active.into_iter().chain(self.emergency).collect()
    }

    fn perform(&mut self, actions: Vec<ArqAction>, now: Millis) {
        for action in actions {
            match action {
                ArqAction::Transmit(frame) => {
                    let Some(peer) = self.peer.clone() else {
                        log::debug!("no avatar address yet; dropping {:?}", frame.msg_type);
                        continue;
                    };
                    if frame.msg_type == MsgType::Cmd {
                        self.stats.cmd_frames_sent += 1;
                    }
                    match encode_frame(&frame) {
                        Ok(bytes) => self.outbound.push((peer, bytes)),
                        Err(e) => log::error!("cannot encode {:?}: {e}", frame.msg_type),
                    }
                }
                ArqAction::Deliver(event) => self.on_protocol_event(event, now),
                ArqAction::DeclareAlive | ArqAction::DeclareDegraded => self.emit_session(now),
                ArqAction::DeclareDead => {
                    log::warn!("avatar session dead");
                    for id in self.in_flight_ids() {
                        self.transition(id, RecordStatus::Failed, Some("session lost".into()), now);
                    }
                    self.cancel_queued(|_| true, "session lost", now);
                    self.arbiter.reset();
                    self.emit_session(now);
                }
            }
        }
    }

    fn on_protocol_event(&mut self, event: ProtocolEvent, now: Millis) {
        match event {
            ProtocolEvent::CommandDelivered(seq) => {
                if let Some(id) = self.lookup(seq) {
                    if self.records[id as usize - 1].status == RecordStatus::Dispatched {
                        self.transition(id, RecordStatus::Delivered, None, now);
                    }
                }
            }
            ProtocolEvent::CommandStatus { seq, phase, detail } => {
                let Some(id) = self.lookup(seq) else { return };
                if self.records[id as usize - 1].status.is_terminal() {
                    self.stats.unknown_seq += 1;
                    log::info!("late {phase:?} status for finished seq {seq} ignored");
                    return;
                }
                match phase {
                    StatusPhase::Executing => self.walk_to_executing(id, now),
                    StatusPhase::Completed => {
                        self.walk_to_executing(id, now);
                        self.transition(id, RecordStatus::Completed, None, now);
                    }
                    StatusPhase::Failed => {
                        self.transition(id, RecordStatus::Failed, Some(detail), now);
                    }
                }
            }
            ProtocolEvent::CommandTimedOut(seq) => {
                if let Some(id) = self.lookup(seq) {
                    self.transition(id, RecordStatus::TimedOut, Some("no acknowledgment".into()), now);
                }
            }
            ProtocolEvent::OdometryReceived { pose, t, .. } => {
                self.pose = Some((pose, now));
                if self.last_relay.is_none_or(|last| now.saturating_sub(last) >= self.config.odom_relay_interval_ms) {
                    self.last_relay = Some(now);
                    self.emit(now, EventKind::Odom, json!({ "x": pose.x, "y": pose.y, "theta": pose.theta, "t": t }));
                }
            }
            ProtocolEvent::SpeakerAngle { angle_deg, .. } => {
                self.speaker = Some((angle_deg, now));
                self.emit(now, EventKind::Speaker, json!({ "angle_deg": angle_deg }));
                let busy = !self.is_idle();
                if let Some(cmd) = self.arbiter.observe(angle_deg, now, busy) {
                    log::info!("speaker at {angle_deg:.1} deg; queueing {cmd}");
                    self.enqueue(Source::Speaker, cmd, now);
                }
            }
            ProtocolEvent::SessionEstablished(session_id) => {
                if self.sessions_seen > 0 {
                    for id in self.in_flight_ids() {
                        self.transition(id, RecordStatus::Failed, Some("session reset".into()), now);
                    }
                }
                self.sessions_seen += 1;
                log::info!("avatar session {session_id:08x} established");
                self.emit_session(now);
            }
            ProtocolEvent::PongReceived { .. } => {}
            ProtocolEvent::CommandReceived { .. } | ProtocolEvent::CommandRejected { .. } => {
                log::warn!("edge received avatar-only event {event:?}")
            }
        }
    }

    fn lookup(&mut self, seq: u32) -> Option<u64> {
        let id = self.by_seq.get(&seq).copied();
        if id.is_none() {
            self.stats.unknown_seq += 1;
            log::info!("status for unknown seq {seq} ignored");
        }
        id
    }

    fn walk_to_executing(&mut self, id: u64, now: Millis) {
        if self.records[id as usize - 1].status == RecordStatus::Dispatched {
            self.transition(id, RecordStatus::Delivered, None, now);
        }
        if self.records[id as usize - 1].status == RecordStatus::Delivered {
            self.transition(id, RecordStatus::Executing, None, now);
        }
    }

    fn emit(&mut self, now: Millis, kind: EventKind, data: serde_json::Value) {
        let id = self.next_event_id;
        self.next_event_id += 1;
        self.events.push(EdgeEvent { id, t_ms: now, kind, data });
    }

    fn emit_record(&mut self, id: u64, now: Millis) {
        let r = &self.records[id as usize - 1];
        let data = json!({
            "id": r.id,
            "source": r.source,
            "command": r.command,
            "seq": r.seq,
            "status": r.status,
            "detail": r.detail,
        });
        self.emit(now, EventKind::Command, data);
    }

    fn emit_session(&mut self, now: Millis) {
        let data = json!({
            "state": self.arq.liveness(),
            "session_id": self.arq.session_id(),
            "rtt_ms": self.arq.rtt_ms(),
        });
        // a HELLO both establishes the session and declares it alive
        if self.last_session_event.as_ref() == Some(&data) {
            return;
        }
        self.last_session_event = Some(data.clone());
        self.emit(now, EventKind::Session, data);
    }
}
