//! The simulated robot as a protocol endpoint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kinematics::{AvatarEvent, AvatarState, KinematicParams};
use super::script::{relative_angle_deg, SpeakerScript};
use crate::pose::Pose;
use crate::proto::{decode_frame, encode_frame, Arq, ArqAction, ArqConfig, Command, OdomBody, ProtocolEvent, StatusPhase};
use crate::transport::Endpoint;
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdomNoise {
    pub pos_std_m: f64,
    pub theta_std_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

impl From<StartPose> for Pose {
    fn from(p: StartPose) -> Self {
        Pose::new(p.x, p.y, p.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvatarConfig {
    pub protocol: ArqConfig,
    pub kinematics: KinematicParams,
    pub start: StartPose,
    pub odom_noise: Option<OdomNoise>,
    pub speaker_interval_ms: u64,
}

impl Default for AvatarConfig {
    fn default() -> Self {
        Self {
            protocol: ArqConfig::default(),
            kinematics: KinematicParams::default(),
            start: StartPose { x: 0.0, y: 0.0, theta: 0.0 },
            odom_noise: None,
            speaker_interval_ms: 250,
        }
    }
}

impl AvatarConfig {
    /// Checks every field, naming the first offending key.
    pub fn validate(&self) -> Result<(), String> {
        self.protocol.validate().map_err(|e| format!("protocol: {e}"))?;
        self.kinematics.validate().map_err(|e| format!("kinematics: {e}"))?;
        if !(self.start.x.is_finite() && self.start.y.is_finite() && self.start.theta.is_finite()) {
            return Err("start: coordinates must be finite".into());
        }
        if let Some(n) = &self.odom_noise {
            if !(n.pos_std_m >= 0.0 && n.theta_std_rad >= 0.0) {
                return Err("odom_noise: standard deviations must be >= 0".into());
            }
        }
        if self.speaker_interval_ms == 0 {
            return Err("speaker_interval_ms must be > 0".into());
        }
        Ok(())
    }
}

/// Things that happened on the avatar, for traces and test oracles.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AvatarLog {
    SessionUp { session_id: u32 },
    SessionDown,
    /// A command was accepted for execution (fresh CMD).
    Executed { seq: u32, command: Command },
    Status { seq: u32, phase: StatusPhase, detail: String },
    Speaker { angle_deg: f64 },
    DecodeError { reason: String },
}

pub struct AvatarNode {
    arq: Arq,
    state: AvatarState,
    config: AvatarConfig,
    script: SpeakerScript,
    edge: Endpoint,
    rng: ChaCha8Rng,
    last_speaker: Option<Millis>,
    outbound: Vec<(Endpoint, Vec<u8>)>,
    log: Vec<(Millis, AvatarLog)>,
}

impl AvatarNode {
    /// A robot at `config.start` that will HELLO `edge`. The session id is
    /// drawn from `seed`, which also drives odometry noise.
    pub fn new(config: AvatarConfig, script: SpeakerScript, edge: Endpoint, seed: u64, now: Millis) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let session_id = loop {
            let id: u32 = rng.random();
            if id != 0 {
                break id;
            }
        };
        Self {
            arq: Arq::avatar(config.protocol.clone(), session_id),
            state: AvatarState::new(config.start.clone().into(), now),
            config,
            script,
            edge,
            rng,
            last_speaker: None,
            outbound: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn pose(&self) -> Pose {
        self.state.pose
    }

    pub fn state(&self) -> &AvatarState {
        &self.state
    }

    pub fn arq(&self) -> &Arq {
        &self.arq
    }

    pub fn session_id(&self) -> u32 {
        self.arq.session_id().expect("avatar always has a session id")
    }

    pub fn edge(&self) -> &Endpoint {
        &self.edge
    }

    pub fn take_outbound(&mut self) -> Vec<(Endpoint, Vec<u8>)> {
        std::mem::take(&mut self.outbound)
    }

    pub fn take_log(&mut self) -> Vec<(Millis, AvatarLog)> {
        std::mem::take(&mut self.log)
    }

    pub fn handle_datagram(&mut self, bytes: &[u8], now: Millis) {
        self.advance(now);
        match decode_frame(bytes) {
            Ok(frame) => {
                let actions = self.arq.handle_frame(&frame, now);
                self.perform(actions, now);
            }
            Err(e) => {
                log::debug!("avatar dropping datagram: {e}");
                self.log.push((now, AvatarLog::DecodeError { reason: e.to_string() }));
            }
        }
    }

    /// Runs the simulation up to `now` and services protocol timers and the
    /// speaker script.
    pub fn tick(&mut self, now: Millis) {
        self.advance(now);
        let actions = self.arq.tick(now);
        self.perform(actions, now);

        if let Some(bearing) = self.script.bearing_at(now) {
            let due = self.last_speaker.is_none_or(|t| now.saturating_sub(t) >= self.config.speaker_interval_ms);
            if due && self.arq.is_established() {
                let angle_deg = relative_angle_deg(bearing, self.state.pose.theta);
                self.last_speaker = Some(now);
                self.log.push((now, AvatarLog::Speaker { angle_deg }));
                match self.arq.send_speaker_angle(angle_deg) {
                    Ok(actions) => self.perform(actions, now),
                    Err(e) => log::error!("speaker report failed: {e}"),
                }
            }
        }
    }

    fn advance(&mut self, now: Millis) {
        if now <= self.state.now {
            return;
        }
        let dt = now - self.state.now;
        let events = self.state.step(dt, &self.config.kinematics);
        self.report(events, now);
    }

    fn report(&mut self, events: Vec<AvatarEvent>, now: Millis) {
        for event in events {
            let (seq, phase, detail) = match event {
                AvatarEvent::Started { seq } => (seq, StatusPhase::Executing, String::new()),
                AvatarEvent::Completed { seq } => (seq, StatusPhase::Completed, String::new()),
                AvatarEvent::Failed { seq, detail } => (seq, StatusPhase::Failed, detail),
                AvatarEvent::Odometry { pose, t } => {
                    let reported = self.noisy(pose);
                    let body = OdomBody { x: reported.x, y: reported.y, theta: reported.theta, t };
                    match self.arq.send_odometry(body) {
                        Ok(actions) => self.perform(actions, now),
                        Err(e) => log::error!("odometry report failed: {e}"),
                    }
                    continue;
                }
            };
            self.log.push((now, AvatarLog::Status { seq, phase, detail: detail.clone() }));
            let pose = phase.is_terminal().then(|| {
                let p = self.noisy(self.state.pose);
                OdomBody { x: p.x, y: p.y, theta: p.theta, t: self.state.now }
            });
            match self.arq.report_status(seq, phase, &detail, pose, now) {
                Ok(actions) => self.perform(actions, now),
                Err(e) => log::error!("status report for {seq} failed: {e}"),
            }
        }
    }

    fn noisy(&mut self, pose: Pose) -> Pose {
        let Some(noise) = self.config.odom_noise else { return pose };
        let mut draw = |std: f64| match Normal::new(0.0, std) {
            Ok(n) if std > 0.0 => n.sample(&mut self.rng),
            _ => 0.0,
        };
        let dx = draw(noise.pos_std_m);
        let dy = draw(noise.pos_std_m);
        let dt = draw(noise.theta_std_rad);
        Pose::new(pose.x + dx, pose.y + dy, pose.theta + dt)
    }

    fn perform(&mut self, actions: Vec<ArqAction>, now: Millis) {
        for action in actions {
            match action {
                ArqAction::Transmit(frame) => match encode_frame(&frame) {
                    Ok(bytes) => self.outbound.push((self.edge.clone(), bytes)),
                    Err(e) => log::error!("cannot encode {:?}: {e}", frame.msg_type),
                },
                ArqAction::Deliver(ProtocolEvent::CommandReceived { seq, command }) => {
                    self.log.push((now, AvatarLog::Executed { seq, command }));
                    let events = self.state.apply_command(&command, seq, &self.config.kinematics);
                    self.report(events, now);
                }
                ArqAction::Deliver(ProtocolEvent::CommandRejected { seq, reason }) => {
                    self.report(vec![AvatarEvent::Failed { seq, detail: format!("malformed: {reason}") }], now);
                }
                ArqAction::Deliver(ProtocolEvent::SessionEstablished(session_id)) => {
                    log::info!("session {session_id:08x} established");
                    self.log.push((now, AvatarLog::SessionUp { session_id }));
                }
                ArqAction::Deliver(other) => log::trace!("avatar event {other:?}"),
                ArqAction::DeclareDead => {
                    log::warn!("edge unreachable; returning to HELLO");
                    self.log.push((now, AvatarLog::SessionDown));
                }
                ArqAction::DeclareDegraded | ArqAction::DeclareAlive => {}
            }
        }
    }
}
