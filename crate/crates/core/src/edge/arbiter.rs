//! Turns a stream of speaker bearings into at most one attention turn.

use serde::{Deserialize, Serialize};

use crate::proto::Command;
use crate::Millis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArbiterParams {
    pub deadband_deg: f64,
    pub dwell_ms: u64,
    pub stability_deg: f64,
}

impl Default for ArbiterParams {
    fn default() -> Self {
        Self { deadband_deg: 10.0, dwell_ms: 1000, stability_deg: 10.0 }
    }
}

impl ArbiterParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.deadband_deg > 0.0 && self.deadband_deg.is_finite()) {
            return Err(format!("deadband_deg must be > 0, got {}", self.deadband_deg));
        }
        if self.dwell_ms == 0 {
            return Err("dwell_ms must be > 0".into());
        }
        if !(self.stability_deg > 0.0 && self.stability_deg.is_finite()) {
            return Err(format!("stability_deg must be > 0, got {}", self.stability_deg));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub angle_deg: f64,
    pub first_seen: Millis,
    pub latest_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerArbiter {
    params: ArbiterParams,
    candidate: Option<Candidate>,
}

impl SpeakerArbiter {
    pub fn new(params: ArbiterParams) -> Self {
        Self { params, candidate: None }
    }

    pub fn candidate(&self) -> Option<Candidate> {
        self.candidate
    }

    pub fn reset(&mut self) {
        self.candidate = None;
    }

    /// Feeds one robot-relative bearing. `busy` is true while anything is in
    /// flight or explicit commands are queued; readings still accumulate
    /// then, but no turn is produced.
    pub fn observe(&mut self, angle_deg: f64, now: Millis, busy: bool) -> Option<Command> {
        match &mut self.candidate {
            Some(c) if (angle_deg - c.angle_deg).abs() <= self.params.stability_deg => c.latest_deg = angle_deg,
            _ => self.candidate = Some(Candidate { angle_deg, first_seen: now, latest_deg: angle_deg }),
        }
        let c = self.candidate?;
        if busy || c.latest_deg.abs() < self.params.deadband_deg || now - c.first_seen < self.params.dwell_ms {
            return None;
        }
        self.candidate = None;
        let deg = c.latest_deg.abs().min(180.0);
        Some(if c.latest_deg > 0.0 { Command::TurnLeft { deg } } else { Command::TurnRight { deg } })
    }
}
