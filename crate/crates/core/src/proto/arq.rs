//! Sans-IO reliability engine for the edge/avatar link.
//!
//! The engine never touches a socket or a clock. Callers feed it decoded
//! frames and timestamps (milliseconds on any monotonic clock) and perform
//! the [`ArqAction`]s it returns, in order.
//!
//! Reliability is selective:
//! - CMD frames (edge -> avatar) use stop-and-wait ARQ: one command in
//!   flight, retransmitted every `retry_interval_ms` until CMD_ACK or until
//!   `max_retries` sends have gone unanswered.
//! - Terminal CMD_STATUS frames (avatar -> edge) are retransmitted until the
//!   edge answers with STATUS_ACK, since a lost completion would stall the
//!   edge's dispatch gate forever. `executing` statuses are best-effort.
//! - ODOM and SPEAKER_ANGLE are best-effort; stale copies are dropped by
//!   sequence number.
//! - Keepalive: after `ping_interval_ms` without any inbound frame a PING is
//!   sent. Each PING left unanswered for a full interval counts as a miss;
//!   the first miss degrades the session and `missed_pong_limit` misses kill
//!   it.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::command::{AckBody, Command, OdomBody, SpeakerBody, StatusBody, StatusPhase};
use super::wire::{Frame, MsgType};
use crate::pose::Pose;
use crate::Millis;

const MAX_TRACKED_PINGS: usize = 8;
const MAX_TRACKED_STATUS_SEQS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Edge,
    Avatar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Liveness {
    Alive,
    Degraded,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArqConfig {
    pub retry_interval_ms: u64,
    pub max_retries: u32,
    pub ping_interval_ms: u64,
    pub missed_pong_limit: u32,
}

impl Default for ArqConfig {
    fn default() -> Self {
        Self { retry_interval_ms: 300, max_retries: 10, ping_interval_ms: 1000, missed_pong_limit: 3 }
    }
}

impl ArqConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.retry_interval_ms == 0 {
            return Err("retry_interval_ms must be > 0".into());
        }
        if self.max_retries == 0 {
            return Err("max_retries must be > 0".into());
        }
        if self.ping_interval_ms == 0 {
            return Err("ping_interval_ms must be > 0".into());
        }
        if self.missed_pong_limit == 0 {
            return Err("missed_pong_limit must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArqError {
    #[error("a command is already awaiting acknowledgment")]
    ChannelBusy,
    #[error("session is dead")]
    SessionDead,
    #[error("operation not available in the {0:?} role")]
    WrongRole(Role),
    #[error("sequence space exhausted for this session")]
    SeqExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolEvent {
    /// Edge: the avatar acknowledged command `seq`.
    CommandDelivered(u32),
    /// Edge: a status report for command `seq`.
    CommandStatus { seq: u32, phase: StatusPhase, detail: String },
    /// Edge: command `seq` exhausted its retries without acknowledgment.
    CommandTimedOut(u32),
    OdometryReceived { pose: Pose, t: u64, seq: u32 },
    SpeakerAngle { angle_deg: f64, seq: u32 },
    SessionEstablished(u32),
    PongReceived { rtt_ms: u64 },
    /// Avatar: a fresh command to execute. Emitted at most once per seq.
    CommandReceived { seq: u32, command: Command },
    /// Avatar: a fresh CMD whose payload did not validate.
    CommandRejected { seq: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArqAction {
    Transmit(Frame),
    Deliver(ProtocolEvent),
    DeclareDegraded,
    DeclareDead,
    /// Liveness returned to Alive after being Degraded or Dead.
    DeclareAlive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outstanding {
    pub seq: u32,
    pub command: Command,
    pub send_count: u32,
    pub last_send: Millis,
    frame: Frame,
}

#[derive(Debug, Clone, PartialEq)]
struct PendingStatus {
    status_seq: u32,
    frame: Frame,
    last_send: Millis,
}

/// Counters for frames the engine dropped or repeated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ArqStats {
    pub wrong_session: u64,
    pub malformed: u64,
    pub duplicates: u64,
    pub stale: u64,
    pub retransmissions: u64,
    pub unknown_type: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arq {
    role: Role,
    config: ArqConfig,
    session_id: Option<u32>,
    established: bool,
    next_seq: u32,
    outstanding: Option<Outstanding>,
    pending_status: VecDeque<PendingStatus>,
    last_executed_seq: u32,
    liveness: Liveness,
    last_inbound: Option<Millis>,
    last_ping_sent: Option<Millis>,
    ping_deadline: Option<Millis>,
    pings: VecDeque<(u32, Millis)>,
    missed_pongs: u32,
    last_pong_time: Option<Millis>,
    rtt_ms: Option<u64>,
    last_odom_seq: Option<u32>,
    last_speaker_seq: Option<u32>,
    seen_status_seqs: BTreeSet<u32>,
    last_hello_sent: Option<Millis>,
    stats: ArqStats,
}

impl Arq {
    /// Edge-side engine. No session exists until the first HELLO arrives.
    pub fn edge(config: ArqConfig) -> Self {
        Self::new(Role::Edge, config, None)
    }

    /// Avatar-side engine proposing `session_id` (nonzero) in its HELLOs.
    pub fn avatar(config: ArqConfig, session_id: u32) -> Self {
        assert!(session_id != 0, "session id 0 is reserved");
        Self::new(Role::Avatar, config, Some(session_id))
    }

    fn new(role: Role, config: ArqConfig, session_id: Option<u32>) -> Self {
        Self {
            role,
            config,
            session_id,
            established: false,
            next_seq: 1,
            outstanding: None,
            pending_status: VecDeque::new(),
            last_executed_seq: 0,
            liveness: Liveness::Dead,
            last_inbound: None,
            last_ping_sent: None,
            ping_deadline: None,
            pings: VecDeque::new(),
            missed_pongs: 0,
            last_pong_time: None,
            rtt_ms: None,
            last_odom_seq: None,
            last_speaker_seq: None,
            seen_status_seqs: BTreeSet::new(),
            last_hello_sent: None,
            stats: ArqStats::default(),
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn config(&self) -> &ArqConfig {
        &self.config
    }

    pub fn session_id(&self) -> Option<u32> {
        self.session_id
    }

    pub fn is_established(&self) -> bool {
        self.established
    }

    pub fn liveness(&self) -> Liveness {
        self.liveness
    }

    pub fn rtt_ms(&self) -> Option<u64> {
        self.rtt_ms
    }

    pub fn outstanding(&self) -> Option<&Outstanding> {
        self.outstanding.as_ref()
    }

    pub fn last_executed_seq(&self) -> u32 {
        self.last_executed_seq
    }

    pub fn last_inbound(&self) -> Option<Millis> {
        self.last_inbound
    }

    pub fn last_pong_time(&self) -> Option<Millis> {
        self.last_pong_time
    }

    pub fn pending_status_count(&self) -> usize {
        self.pending_status.len()
    }

    pub fn stats(&self) -> ArqStats {
        self.stats
    }

    fn alloc_seq(&mut self) -> Result<u32, ArqError> {
        if self.next_seq == u32::MAX {
            return Err(ArqError::SeqExhausted);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        Ok(seq)
    }

    fn sid(&self) -> u32 {
        self.session_id.unwrap_or(0)
    }

    fn session_usable(&self) -> bool {
        match self.role {
            Role::Edge => self.session_id.is_some() && self.liveness != Liveness::Dead,
            Role::Avatar => self.established,
        }
    }

    /// Sends `cmd` as a fresh CMD. Edge role only.
    pub fn send_command(&mut self, cmd: Command, now: Millis) -> Result<Vec<ArqAction>, ArqError> {
        self.require(Role::Edge)?;
        if !self.session_usable() {
            return Err(ArqError::SessionDead);
        }
        if self.outstanding.is_some() {
            return Err(ArqError::ChannelBusy);
        }
        self.transmit_command(cmd, now)
    }

    /// Sends `cmd` even if another command is awaiting its ack; the older
    /// command stops being retransmitted and its seq is returned. Used for
    /// emergency stops. The avatar will never execute the superseded seq once
    /// the newer one has arrived.
    pub fn send_command_preempting(
        &mut self,
        cmd: Command,
        now: Millis,
    ) -> Result<(Vec<ArqAction>, Option<u32>), ArqError> {
        self.require(Role::Edge)?;
        if !self.session_usable() {
            return Err(ArqError::SessionDead);
        }
        let superseded = self.outstanding.take().map(|o| o.seq);
        let actions = self.transmit_command(cmd, now)?;
        Ok((actions, superseded))
    }

    fn transmit_command(&mut self, cmd: Command, now: Millis) -> Result<Vec<ArqAction>, ArqError> {
        let seq = self.alloc_seq()?;
        let frame = Frame::with_json(MsgType::Cmd, seq, self.sid(), &cmd);
        self.outstanding = Some(Outstanding {
            seq,
            command: cmd,
            send_count: 1,
            last_send: now,
            frame: frame.clone(),
        });
        Ok(vec![ArqAction::Transmit(frame)])
    }

    /// Reports progress of command `cmd_seq`. Avatar role only. Terminal
    /// phases are queued for retransmission until acknowledged, even while
    /// the session is down.
    pub fn report_status(
        &mut self,
        cmd_seq: u32,
        phase: StatusPhase,
        detail: &str,
        pose: Option<OdomBody>,
        now: Millis,
    ) -> Result<Vec<ArqAction>, ArqError> {
        self.require(Role::Avatar)?;
        if !phase.is_terminal() && !self.established {
            return Ok(Vec::new());
        }
        let seq = self.alloc_seq()?;
        let body = StatusBody { cmd_seq, phase, detail: detail.to_string(), pose };
        let frame = Frame::with_json(MsgType::CmdStatus, seq, self.sid(), &body);
        if phase.is_terminal() {
            self.pending_status.push_back(PendingStatus { status_seq: seq, frame: frame.clone(), last_send: now });
        }
        if self.established {
            Ok(vec![ArqAction::Transmit(frame)])
        } else {
            Ok(Vec::new())
        }
    }

    /// Best-effort odometry report. Avatar role only; nothing is sent before
    /// the session is established.
    pub fn send_odometry(&mut self, body: OdomBody) -> Result<Vec<ArqAction>, ArqError> {
        self.require(Role::Avatar)?;
        if !self.established {
            return Ok(Vec::new());
        }
        let seq = self.alloc_seq()?;
        Ok(vec![ArqAction::Transmit(Frame::with_json(MsgType::Odom, seq, self.sid(), &body))])
    }

    /// Best-effort speaker bearing report. Avatar role only.
    pub fn send_speaker_angle(&mut self, angle_deg: f64) -> Result<Vec<ArqAction>, ArqError> {
        self.require(Role::Avatar)?;
        if !self.established {
            return Ok(Vec::new());
        }
        let seq = self.alloc_seq()?;
        let frame = Frame::with_json(MsgType::SpeakerAngle, seq, self.sid(), &SpeakerBody { angle_deg });
        Ok(vec![ArqAction::Transmit(frame)])
    }

    fn require(&self, role: Role) -> Result<(), ArqError> {
        if self.role == role {
            Ok(())
        } else {
            Err(ArqError::WrongRole(self.role))
        }
    }

    /// Processes one inbound frame.
    pub fn handle_frame(&mut self, frame: &Frame, now: Millis) -> Vec<ArqAction> {
        let mut out = Vec::new();
        match self.role {
            Role::Edge => self.edge_frame(frame, now, &mut out),
            Role::Avatar => self.avatar_frame(frame, now, &mut out),
        }
        out
    }

    fn note_contact(&mut self, now: Millis, out: &mut Vec<ArqAction>) {
        self.last_inbound = Some(now);
        self.missed_pongs = 0;
        self.ping_deadline = None;
        if self.liveness != Liveness::Alive {
            self.liveness = Liveness::Alive;
            out.push(ArqAction::DeclareAlive);
        }
    }

    fn reset_session_tracking(&mut self) {
        self.last_odom_seq = None;
        self.last_speaker_seq = None;
        self.seen_status_seqs.clear();
        self.pings.clear();
        self.missed_pongs = 0;
        self.ping_deadline = None;
        self.last_ping_sent = None;
    }

    fn edge_frame(&mut self, frame: &Frame, now: Millis, out: &mut Vec<ArqAction>) {
        if frame.msg_type == MsgType::Hello {
            let fresh = self.session_id != Some(frame.session_id);
            if fresh {
                if let Some(old) = self.outstanding.take() {
                    out.push(ArqAction::Deliver(ProtocolEvent::CommandTimedOut(old.seq)));
                }
                self.reset_session_tracking();
                self.session_id = Some(frame.session_id);
            }
            self.established = true;
            self.note_contact(now, out);
            match self.alloc_seq() {
                Ok(seq) => out.push(ArqAction::Transmit(Frame::empty(MsgType::HelloAck, seq, frame.session_id))),
                Err(_) => log::error!("sequence space exhausted; cannot answer HELLO"),
            }
            if fresh {
                out.push(ArqAction::Deliver(ProtocolEvent::SessionEstablished(frame.session_id)));
            }
            return;
        }

        if self.session_id != Some(frame.session_id) {
            self.stats.wrong_session += 1;
            return;
        }
        self.note_contact(now, out);

        match frame.msg_type {
            MsgType::Ping => self.answer_ping(frame, out),
            MsgType::Pong => self.take_pong(frame, now, out),
            MsgType::CmdAck => {
                let Some(body) = self.parse::<AckBody>(frame) else { return };
                match &self.outstanding {
                    Some(o) if o.seq == body.ack_seq => {
                        self.outstanding = None;
                        out.push(ArqAction::Deliver(ProtocolEvent::CommandDelivered(body.ack_seq)));
                    }
                    _ => self.stats.duplicates += 1,
                }
            }
            MsgType::CmdStatus => {
                let Some(body) = self.parse::<StatusBody>(frame) else { return };
                // the previous ack may have been lost, so every copy is acked
                match self.alloc_seq() {
                    Ok(seq) => out.push(ArqAction::Transmit(Frame::with_json(
                        MsgType::StatusAck,
                        seq,
                        self.sid(),
                        &AckBody { ack_seq: frame.seq },
                    ))),
                    Err(_) => log::error!("sequence space exhausted; cannot ack status"),
                }
                if !self.seen_status_seqs.insert(frame.seq) {
                    self.stats.duplicates += 1;
                    return;
                }
                while self.seen_status_seqs.len() > MAX_TRACKED_STATUS_SEQS {
                    self.seen_status_seqs.pop_first();
                }
                // a status proves the CMD arrived even if its ack was lost
                if self.outstanding.as_ref().is_some_and(|o| o.seq == body.cmd_seq) {
                    self.outstanding = None;
                    out.push(ArqAction::Deliver(ProtocolEvent::CommandDelivered(body.cmd_seq)));
                }
                if let Some(p) = body.pose {
                    if self.last_odom_seq.is_none_or(|last| frame.seq > last) {
                        self.last_odom_seq = Some(frame.seq);
                        out.push(ArqAction::Deliver(ProtocolEvent::OdometryReceived {
                            pose: Pose::new(p.x, p.y, p.theta),
                            t: p.t,
                            seq: frame.seq,
                        }));
                    }
                }
                out.push(ArqAction::Deliver(ProtocolEvent::CommandStatus {
                    seq: body.cmd_seq,
                    phase: body.phase,
                    detail: body.detail,
                }));
            }
            MsgType::Odom => {
                if self.last_odom_seq.is_some_and(|last| frame.seq <= last) {
                    self.stats.stale += 1;
                    return;
                }
                let Some(body) = self.parse::<OdomBody>(frame) else { return };
                self.last_odom_seq = Some(frame.seq);
                out.push(ArqAction::Deliver(ProtocolEvent::OdometryReceived {
                    pose: Pose::new(body.x, body.y, body.theta),
                    t: body.t,
                    seq: frame.seq,
                }));
            }
            MsgType::SpeakerAngle => {
                if self.last_speaker_seq.is_some_and(|last| frame.seq <= last) {
                    self.stats.stale += 1;
                    return;
                }
                let Some(body) = self.parse::<SpeakerBody>(frame) else { return };
                self.last_speaker_seq = Some(frame.seq);
                out.push(ArqAction::Deliver(ProtocolEvent::SpeakerAngle {
                    angle_deg: body.angle_deg,
                    seq: frame.seq,
                }));
            }
            MsgType::Unknown(_) => self.stats.unknown_type += 1,
            _ => log::debug!("edge ignoring {:?} from avatar", frame.msg_type),
        }
    }

    fn avatar_frame(&mut self, frame: &Frame, now: Millis, out: &mut Vec<ArqAction>) {
        if self.session_id != Some(frame.session_id) {
            self.stats.wrong_session += 1;
            return;
        }
        self.note_contact(now, out);
        if !self.established {
            // HELLO_ACK, or any frame proving the edge adopted our session
            self.established = true;
            self.last_ping_sent = None;
            out.push(ArqAction::Deliver(ProtocolEvent::SessionEstablished(self.sid())));
        }

        match frame.msg_type {
            MsgType::HelloAck => {}
            MsgType::Ping => self.answer_ping(frame, out),
            MsgType::Pong => self.take_pong(frame, now, out),
            MsgType::Cmd => {
                let ack = |this: &mut Self, out: &mut Vec<ArqAction>| match this.alloc_seq() {
                    Ok(seq) => out.push(ArqAction::Transmit(Frame::with_json(
                        MsgType::CmdAck,
                        seq,
                        this.sid(),
                        &AckBody { ack_seq: frame.seq },
                    ))),
                    Err(_) => log::error!("sequence space exhausted; cannot ack command"),
                };
                ack(self, out);
                if frame.seq <= self.last_executed_seq {
                    self.stats.duplicates += 1;
                    return;
                }
                self.last_executed_seq = frame.seq;
                let event = match frame.json::<Command>() {
                    Ok(command) => ProtocolEvent::CommandReceived { seq: frame.seq, command },
                    Err(e) => ProtocolEvent::CommandRejected { seq: frame.seq, reason: e.to_string() },
                };
                out.push(ArqAction::Deliver(event));
            }
            MsgType::StatusAck => {
                let Some(body) = self.parse::<AckBody>(frame) else { return };
                let before = self.pending_status.len();
                self.pending_status.retain(|p| p.status_seq != body.ack_seq);
                if self.pending_status.len() == before {
                    self.stats.duplicates += 1;
                }
            }
            MsgType::Unknown(_) => self.stats.unknown_type += 1,
            _ => log::debug!("avatar ignoring {:?} from edge", frame.msg_type),
        }
    }

    fn parse<T: serde::de::DeserializeOwned>(&mut self, frame: &Frame) -> Option<T> {
        match frame.json::<T>() {
            Ok(body) => Some(body),
            Err(e) => {
                log::warn!("dropping frame seq {}: {e}", frame.seq);
                self.stats.malformed += 1;
                None
            }
        }
    }

    fn answer_ping(&mut self, ping: &Frame, out: &mut Vec<ArqAction>) {
        // PONG echoes the PING's seq instead of drawing a fresh one
        out.push(ArqAction::Transmit(Frame::empty(MsgType::Pong, ping.seq, self.sid())));
    }

    fn take_pong(&mut self, pong: &Frame, now: Millis, out: &mut Vec<ArqAction>) {
        self.last_pong_time = Some(now);
        if let Some(idx) = self.pings.iter().position(|(seq, _)| *seq == pong.seq) {
            let (_, sent) = self.pings.remove(idx).unwrap();
            let rtt_ms = now.saturating_sub(sent);
            self.rtt_ms = Some(rtt_ms);
            out.push(ArqAction::Deliver(ProtocolEvent::PongReceived { rtt_ms }));
        }
    }

    /// Advances timers: command retransmission and timeout, status
    /// retransmission, HELLO repetition, and keepalive.
    pub fn tick(&mut self, now: Millis) -> Vec<ArqAction> {
        let mut out = Vec::new();
        match self.role {
            Role::Edge => self.tick_outstanding(now, &mut out),
            Role::Avatar => {
                if !self.established {
                    self.tick_hello(now, &mut out);
                    return out;
                }
                self.tick_pending_status(now, &mut out);
            }
        }
        if self.session_usable() {
            self.tick_keepalive(now, &mut out);
        }
        out
    }

    fn tick_outstanding(&mut self, now: Millis, out: &mut Vec<ArqAction>) {
        let retry = self.config.retry_interval_ms;
        let max = self.config.max_retries;
        let Some(o) = self.outstanding.as_mut() else { return };
        if now.saturating_sub(o.last_send) < retry {
            return;
        }
        if o.send_count >= max {
            let seq = o.seq;
            self.outstanding = None;
            out.push(ArqAction::Deliver(ProtocolEvent::CommandTimedOut(seq)));
            if self.liveness == Liveness::Alive {
                self.liveness = Liveness::Degraded;
                out.push(ArqAction::DeclareDegraded);
            }
        } else {
            o.send_count += 1;
            o.last_send = now;
            self.stats.retransmissions += 1;
            out.push(ArqAction::Transmit(o.frame.clone()));
        }
    }

    fn tick_pending_status(&mut self, now: Millis, out: &mut Vec<ArqAction>) {
        let retry = self.config.retry_interval_ms;
        for pending in self.pending_status.iter_mut() {
            if now.saturating_sub(pending.last_send) >= retry {
                pending.last_send = now;
                self.stats.retransmissions += 1;
                out.push(ArqAction::Transmit(pending.frame.clone()));
            }
        }
    }

    fn tick_hello(&mut self, now: Millis, out: &mut Vec<ArqAction>) {
        let due = self
            .last_hello_sent
            .is_none_or(|last| now.saturating_sub(last) >= self.config.ping_interval_ms);
        if !due {
            return;
        }
        match self.alloc_seq() {
            Ok(seq) => {
                self.last_hello_sent = Some(now);
                out.push(ArqAction::Transmit(Frame::empty(MsgType::Hello, seq, self.sid())));
            }
            Err(_) => log::error!("sequence space exhausted; cannot send HELLO"),
        }
    }

    fn tick_keepalive(&mut self, now: Millis, out: &mut Vec<ArqAction>) {
        let interval = self.config.ping_interval_ms;
        if let Some(deadline) = self.ping_deadline {
            if now >= deadline {
                self.ping_deadline = None;
                self.missed_pongs += 1;
                if self.missed_pongs >= self.config.missed_pong_limit {
                    self.declare_dead(out);
                    return;
                }
                if self.liveness == Liveness::Alive {
                    self.liveness = Liveness::Degraded;
                    out.push(ArqAction::DeclareDegraded);
                }
            }
        }
        if self.ping_deadline.is_some() {
            return;
        }
        let reference = self.last_inbound.max(self.last_ping_sent).unwrap_or(now);
        if now.saturating_sub(reference) < interval {
            return;
        }
        match self.alloc_seq() {
            Ok(seq) => {
                self.last_ping_sent = Some(now);
                self.ping_deadline = Some(now + interval);
                self.pings.push_back((seq, now));
                if self.pings.len() > MAX_TRACKED_PINGS {
                    self.pings.pop_front();
                }
                out.push(ArqAction::Transmit(Frame::empty(MsgType::Ping, seq, self.sid())));
            }
            Err(_) => log::error!("sequence space exhausted; cannot send PING"),
        }
    }

    fn declare_dead(&mut self, out: &mut Vec<ArqAction>) {
        self.liveness = Liveness::Dead;
        self.missed_pongs = 0;
        self.ping_deadline = None;
        self.pings.clear();
        out.push(ArqAction::DeclareDead);
        match self.role {
            Role::Edge => {
                if let Some(o) = self.outstanding.take() {
                    out.push(ArqAction::Deliver(ProtocolEvent::CommandTimedOut(o.seq)));
                }
            }
            Role::Avatar => {
                // back to HELLO, keeping the same session id and executed seq
                self.established = false;
                self.last_hello_sent = None;
            }
        }
    }
}
