//! Low-level actuation commands and the JSON payload bodies of each message type.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest single turn, degrees.
pub const MAX_TURN_DEG: f64 = 180.0;
/// Largest single translation, meters.
pub const MAX_DRIVE_M: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed command: {0}")]
pub struct CommandError(pub String);

/// One actuation instruction for the avatar.
///
/// `drive-left`/`drive-right` are forward arcs of the given length; the arc
/// radius is a property of the robot, not of the command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCommand", into = "RawCommand")]
pub enum Command {
    Park,
    TurnLeft { deg: f64 },
    TurnRight { deg: f64 },
    DriveLeft { m: f64 },
    DriveRight { m: f64 },
    DriveForward { m: f64 },
    StopDrive,
}

impl Command {
    pub fn op(&self) -> &'static str {
        match self {
            Command::Park => "park",
            Command::TurnLeft { .. } => "turn-left",
            Command::TurnRight { .. } => "turn-right",
            Command::DriveLeft { .. } => "drive-left",
            Command::DriveRight { .. } => "drive-right",
            Command::DriveForward { .. } => "drive-forward",
            Command::StopDrive => "stop-drive",
        }
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, Command::StopDrive)
    }

    /// Parses and validates a command from JSON text.
    pub fn from_json(text: &str) -> Result<Self, CommandError> {
        serde_json::from_str(text).map_err(|e| CommandError(e.to_string()))
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, CommandError> {
        serde_json::from_value(value).map_err(|e| CommandError(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("commands always serialize")
    }

    pub fn validate(&self) -> Result<(), CommandError> {
        fn check(name: &str, value: f64, max: f64) -> Result<(), CommandError> {
            if !value.is_finite() || value <= 0.0 {
                return Err(CommandError(format!("{name} must be a positive number, got {value}")));
            }
            if value > max {
                return Err(CommandError(format!("{name} must be at most {max}, got {value}")));
            }
            Ok(())
        }
        match *self {
            Command::TurnLeft { deg } | Command::TurnRight { deg } => check("deg", deg, MAX_TURN_DEG),
            Command::DriveLeft { m } | Command::DriveRight { m } | Command::DriveForward { m } => {
                check("m", m, MAX_DRIVE_M)
            }
            Command::Park | Command::StopDrive => Ok(()),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Command::TurnLeft { deg } | Command::TurnRight { deg } => {
                write!(f, "{} {:.3}deg", self.op(), deg)
            }
            Command::DriveLeft { m } | Command::DriveRight { m } | Command::DriveForward { m } => {
                write!(f, "{} {:.3}m", self.op(), m)
            }
            _ => f.write_str(self.op()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCommand {
    op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
}

impl TryFrom<RawCommand> for Command {
    type Error = CommandError;

    fn try_from(raw: RawCommand) -> Result<Self, Self::Error> {
        let need_deg = |raw: &RawCommand| -> Result<f64, CommandError> {
            if raw.m.is_some() {
                return Err(CommandError(format!("{} does not take `m`", raw.op)));
            }
            raw.deg.ok_or_else(|| CommandError(format!("{} requires `deg`", raw.op)))
        };
        let need_m = |raw: &RawCommand| -> Result<f64, CommandError> {
            if raw.deg.is_some() {
                return Err(CommandError(format!("{} does not take `deg`", raw.op)));
            }
            raw.m.ok_or_else(|| CommandError(format!("{} requires `m`", raw.op)))
        };
        let bare = |raw: &RawCommand, cmd: Command| -> Result<Command, CommandError> {
            if raw.deg.is_some() || raw.m.is_some() {
                return Err(CommandError(format!("{} takes no parameters", raw.op)));
            }
            Ok(cmd)
        };
        let cmd = match raw.op.as_str() {
            "park" => bare(&raw, Command::Park)?,
            "stop-drive" => bare(&raw, Command::StopDrive)?,
            "turn-left" => Command::TurnLeft { deg: need_deg(&raw)? },
            "turn-right" => Command::TurnRight { deg: need_deg(&raw)? },
            "drive-left" => Command::DriveLeft { m: need_m(&raw)? },
            "drive-right" => Command::DriveRight { m: need_m(&raw)? },
            "drive-forward" => Command::DriveForward { m: need_m(&raw)? },
            other => return Err(CommandError(format!("unknown op `{other}`"))),
        };
        cmd.validate()?;
        Ok(cmd)
    }
}

impl From<Command> for RawCommand {
    fn from(cmd: Command) -> Self {
        let op = cmd.op().to_string();
        match cmd {
            Command::TurnLeft { deg } | Command::TurnRight { deg } => RawCommand { op, deg: Some(deg), m: None },
            Command::DriveLeft { m } | Command::DriveRight { m } | Command::DriveForward { m } => {
                RawCommand { op, deg: None, m: Some(m) }
            }
            Command::Park | Command::StopDrive => RawCommand { op, deg: None, m: None },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusPhase {
    Executing,
    Completed,
    Failed,
}

impl StatusPhase {
    pub fn is_terminal(self) -> bool {
        !matches!(self, StatusPhase::Executing)
    }
}

/// CMD_ACK and STATUS_ACK body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckBody {
    pub ack_seq: u32,
}

/// CMD_STATUS body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusBody {
    pub cmd_seq: u32,
    pub phase: StatusPhase,
    #[serde(default)]
    pub detail: String,
    /// Pose when the command finished; omitted on the wire when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<OdomBody>,
}

/// ODOM body. Meters, radians, and the avatar's clock in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdomBody {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub t: u64,
}

/// SPEAKER_ANGLE body; robot-relative bearing in degrees, counterclockwise positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerBody {
    pub angle_deg: f64,
}
