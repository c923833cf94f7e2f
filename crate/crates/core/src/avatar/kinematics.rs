//! Unicycle execution of low-level commands.

use serde::{Deserialize, Serialize};

use crate::pose::{normalize_angle, Pose};
use crate::proto::Command;
use crate::Millis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicParams {
    /// m/s
    pub linear_speed: f64,
    /// rad/s
    pub angular_speed: f64,
    /// Radius of drive-left/drive-right arcs, meters.
    pub arc_radius: f64,
    pub odom_interval_ms: u64,
}

impl Default for KinematicParams {
    fn default() -> Self {
        Self {
            linear_speed: 0.5,
            angular_speed: std::f64::consts::FRAC_PI_2,
            arc_radius: 0.5,
            odom_interval_ms: 200,
        }
    }
}

impl KinematicParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("linear_speed", self.linear_speed),
            ("angular_speed", self.angular_speed),
            ("arc_radius", self.arc_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        if self.odom_interval_ms == 0 {
            return Err("odom_interval_ms must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// +1 counterclockwise (left), -1 clockwise (right).
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Idle,
    Parked,
    /// In-place rotation with `remaining` radians to go.
    Turning { remaining: f64, side: Side },
    /// Straight translation with `remaining` meters to go.
    Driving { remaining: f64 },
    /// Forward arc with `remaining` meters of arc length to go.
    Arcing { remaining: f64, radius: f64, side: Side },
}

impl Motion {
    pub fn is_moving(&self) -> bool {
        !matches!(self, Motion::Idle | Motion::Parked)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AvatarEvent {
    /// Command accepted and executing.
    Started { seq: u32 },
    Completed { seq: u32 },
    Failed { seq: u32, detail: String },
    Odometry { pose: Pose, t: Millis },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvatarState {
    pub pose: Pose,
    pub motion: Motion,
    pub active_cmd_seq: Option<u32>,
    pub odom_count: u64,
    pub last_odom_time: Option<Millis>,
    /// Simulation clock.
    pub now: Millis,
}

impl AvatarState {
    pub fn new(pose: Pose, now: Millis) -> Self {
        Self { pose, motion: Motion::Idle, active_cmd_seq: None, odom_count: 0, last_odom_time: None, now }
    }

    /// Starts `cmd`. `stop-drive` is accepted at any time and preempts the
    /// active command; anything else is refused while moving.
    pub fn apply_command(&mut self, cmd: &Command, seq: u32, params: &KinematicParams) -> Vec<AvatarEvent> {
        if let Err(e) = cmd.validate() {
            return vec![AvatarEvent::Failed { seq, detail: e.to_string() }];
        }
        if cmd.is_stop() {
            let mut events = Vec::new();
            if let Some(active) = self.active_cmd_seq.take() {
                events.push(AvatarEvent::Failed { seq: active, detail: "preempted".into() });
            }
            self.motion = Motion::Idle;
            events.push(AvatarEvent::Started { seq });
            events.push(AvatarEvent::Completed { seq });
            return events;
        }
        if self.motion.is_moving() {
            return vec![AvatarEvent::Failed { seq, detail: "busy".into() }];
        }

        let motion = match *cmd {
            Command::Park => {
                self.motion = Motion::Parked;
                return vec![AvatarEvent::Started { seq }, AvatarEvent::Completed { seq }];
            }
            Command::TurnLeft { deg } => Motion::Turning { remaining: deg.to_radians(), side: Side::Left },
            Command::TurnRight { deg } => Motion::Turning { remaining: deg.to_radians(), side: Side::Right },
            Command::DriveForward { m } => Motion::Driving { remaining: m },
            Command::DriveLeft { m } => Motion::Arcing { remaining: m, radius: params.arc_radius, side: Side::Left },
            Command::DriveRight { m } => Motion::Arcing { remaining: m, radius: params.arc_radius, side: Side::Right },
            Command::StopDrive => unreachable!("handled above"),
        };
        self.motion = motion;
        self.active_cmd_seq = Some(seq);
        vec![AvatarEvent::Started { seq }]
    }

    /// Advances the simulation by `dt` milliseconds.
    pub fn step(&mut self, dt: Millis, params: &KinematicParams) -> Vec<AvatarEvent> {
        let mut events = Vec::new();
        self.now += dt;
        let secs = dt as f64 / 1000.0;

        let finished = match &mut self.motion {
            Motion::Idle | Motion::Parked => false,
            Motion::Turning { remaining, side } => {
                let (delta, done) = advance(remaining, params.angular_speed * secs);
                self.pose = rotate(&self.pose, side.sign() * delta);
                done
            }
            Motion::Driving { remaining } => {
                let (d, done) = advance(remaining, params.linear_speed * secs);
                self.pose = straight(&self.pose, d);
                done
            }
            Motion::Arcing { remaining, radius, side } => {
                let (s, done) = advance(remaining, params.linear_speed * secs);
                self.pose = arc(&self.pose, s, *radius, side.sign());
                done
            }
        };
        if finished {
            self.motion = Motion::Idle;
            if let Some(seq) = self.active_cmd_seq.take() {
                events.push(AvatarEvent::Completed { seq });
            }
        }

        let due = self.last_odom_time.is_none_or(|last| self.now - last >= params.odom_interval_ms);
        if due {
            self.last_odom_time = Some(self.now);
            self.odom_count += 1;
            events.push(AvatarEvent::Odometry { pose: self.pose, t: self.now });
        }
        events
    }
}

/// Consumes up to `budget` of `remaining`; returns the amount used and whether it ran out.
fn advance(remaining: &mut f64, budget: f64) -> (f64, bool) {
    if budget >= *remaining {
        let used = *remaining;
        *remaining = 0.0;
        (used, true)
    } else {
        *remaining -= budget;
        (budget, false)
    }
}

pub fn straight(pose: &Pose, d: f64) -> Pose {
    Pose { x: pose.x + d * pose.theta.cos(), y: pose.y + d * pose.theta.sin(), theta: pose.theta }
}

pub fn rotate(pose: &Pose, delta: f64) -> Pose {
    Pose { theta: normalize_angle(pose.theta + delta), ..*pose }
}

/// Rolls `s` meters along a circle of `radius` whose center sits `radius`
/// to the left (`sign` = +1) or right (`sign` = -1) of the robot.
pub fn arc(pose: &Pose, s: f64, radius: f64, sign: f64) -> Pose {
    let theta = pose.theta;
    let theta_end = theta + sign * s / radius;
    Pose {
        x: pose.x + sign * radius * (theta_end.sin() - theta.sin()),
        y: pose.y + sign * radius * (theta.cos() - theta_end.cos()),
        theta: normalize_angle(theta_end),
    }
}
