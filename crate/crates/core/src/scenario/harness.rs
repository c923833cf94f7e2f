//! Edge and avatar wired together over an in-process network on a shared
//! virtual clock.

use serde::Serialize;

use crate::avatar::{AvatarConfig, AvatarLog, AvatarNode, Motion, SpeakerScript};
use crate::edge::{EdgeConfig, EdgeCore, EdgeEvent};
use crate::nav::MapError;
use crate::pose::Pose;
use crate::proto::Liveness;
use crate::transport::{Endpoint, Impairment, SimNetwork};
use crate::Millis;

/// One line of a JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub t: Millis,
    pub source: &'static str,
    pub event: String,
    pub data: serde_json::Value,
}

impl TraceEntry {
    pub fn from_edge(e: &EdgeEvent) -> Self {
        let mut data = e.data.clone();
        if let Some(obj) = data.as_object_mut() {
            obj.insert("event_id".into(), e.id.into());
        }
        Self { t: e.t_ms, source: "edge", event: e.kind.as_str().to_string(), data }
    }

    pub fn from_avatar(t: Millis, log: &AvatarLog) -> Self {
        let mut data = serde_json::to_value(log).expect("avatar log serializes");
        let event = data
            .as_object_mut()
            .and_then(|o| o.remove("event"))
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        Self { t, source: "avatar", event, data }
    }
}

pub struct SimHarness {
    net: SimNetwork,
    edge: EdgeCore,
    edge_at: Endpoint,
    avatar: AvatarNode,
    avatar_at: Endpoint,
    now: Millis,
    tick_ms: Millis,
    trace: Vec<TraceEntry>,
    edge_events: Vec<EdgeEvent>,
    avatar_log: Vec<(Millis, AvatarLog)>,
}

impl SimHarness {
    pub const DEFAULT_TICK_MS: Millis = 10;

    pub fn new(
        edge_config: EdgeConfig,
        map_text: String,
        avatar_config: AvatarConfig,
        script: SpeakerScript,
        impairment: Impairment,
        seed: u64,
    ) -> Result<Self, MapError> {
        let mut net = SimNetwork::new(impairment);
        let edge_at = net.register();
        let avatar_at = net.register();
        let edge = EdgeCore::new(edge_config, map_text)?;
        let avatar = AvatarNode::new(avatar_config, script, edge_at.clone(), seed, 0);
        Ok(Self {
            net,
            edge,
            edge_at,
            avatar,
            avatar_at,
            now: 0,
            tick_ms: Self::DEFAULT_TICK_MS,
            trace: Vec::new(),
            edge_events: Vec::new(),
            avatar_log: Vec::new(),
        })
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn edge(&self) -> &EdgeCore {
        &self.edge
    }

    pub fn edge_mut(&mut self) -> &mut EdgeCore {
        &mut self.edge
    }

    pub fn avatar(&self) -> &AvatarNode {
        &self.avatar
    }

    pub fn network(&self) -> &SimNetwork {
        &self.net
    }

    pub fn set_impairment(&mut self, impairment: Impairment) {
        self.net.set_impairment(impairment);
    }

    /// Every edge event emitted so far, in order.
    pub fn edge_events(&self) -> &[EdgeEvent] {
        &self.edge_events
    }

    /// Every avatar log entry so far, in order.
    pub fn avatar_log(&self) -> &[(Millis, AvatarLog)] {
        &self.avatar_log
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn note(&mut self, event: &str, data: serde_json::Value) {
        self.trace.push(TraceEntry { t: self.now, source: "scenario", event: event.to_string(), data });
    }

    /// Runs any work due at the current instant (after a direct call into
    /// the edge, for instance) without advancing time.
    pub fn flush(&mut self) {
        self.collect();
        self.route();
    }

    /// Advances the clock by one tick.
    pub fn step(&mut self) {
        self.now += self.tick_ms;
        let now = self.now;
        for (bytes, from) in self.net.poll_receive(&self.avatar_at, now) {
            debug_assert_eq!(from, self.edge_at);
            self.avatar.handle_datagram(&bytes, now);
        }
        for (bytes, from) in self.net.poll_receive(&self.edge_at, now) {
            self.edge.handle_datagram(&bytes, from, now);
        }
        self.avatar.tick(now);
        self.edge.tick(now);
        self.flush();
    }

    fn route(&mut self) {
        let now = self.now;
        for (to, bytes) in self.avatar.take_outbound() {
            if let Err(e) = self.net.send(&self.avatar_at, &to, &bytes, now) {
                log::error!("avatar send failed: {e}");
            }
        }
        for (to, bytes) in self.edge.take_outbound() {
            if let Err(e) = self.net.send(&self.edge_at, &to, &bytes, now) {
                log::error!("edge send failed: {e}");
            }
        }
    }

    fn collect(&mut self) {
        for (t, log) in self.avatar.take_log() {
            self.trace.push(TraceEntry::from_avatar(t, &log));
            self.avatar_log.push((t, log));
        }
        for e in self.edge.take_events() {
            self.trace.push(TraceEntry::from_edge(&e));
            self.edge_events.push(e);
        }
    }

    pub fn run_for(&mut self, ms: Millis) {
        let until = self.now + ms;
        while self.now < until {
            self.step();
        }
    }

    /// Steps until `done` holds or `timeout_ms` elapses; reports success.
    pub fn run_until(&mut self, timeout_ms: Millis, mut done: impl FnMut(&Self) -> bool) -> bool {
        let until = self.now + timeout_ms;
        while !done(self) {
            if self.now >= until {
                return false;
            }
            self.step();
        }
        true
    }

    pub fn run_until_alive(&mut self, timeout_ms: Millis) -> bool {
        self.run_until(timeout_ms, |h| h.edge.liveness() == Liveness::Alive && h.edge.pose().is_some())
    }

    /// Nothing queued or in flight at the edge, the robot stands still and
    /// no completion report is waiting for its acknowledgment.
    pub fn is_quiescent(&self) -> bool {
        self.edge.is_idle()
            && matches!(self.avatar.state().motion, Motion::Idle | Motion::Parked)
            && self.avatar.arq().pending_status_count() == 0
    }

    pub fn run_until_idle(&mut self, timeout_ms: Millis) -> bool {
        self.run_until(timeout_ms, Self::is_quiescent)
    }

    /// True pose of the simulated robot.
    pub fn avatar_pose(&self) -> Pose {
        self.avatar.pose()
    }
}
