//! Scripted speaker bearings standing in for a microphone array.

use serde::{Deserialize, Serialize};

use crate::pose::normalize_deg;
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerEntry {
    pub start_ms: Millis,
    pub duration_ms: Millis,
    /// World-frame bearing of the talker, degrees counterclockwise from +x.
    pub bearing_deg: f64,
}

impl SpeakerEntry {
    pub fn end_ms(&self) -> Millis {
        self.start_ms + self.duration_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerScript {
    pub entries: Vec<SpeakerEntry>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScriptError {
    #[error("speaker script is not valid JSON: {0}")]
    Json(String),
    #[error("entry {index} starts before the previous entry ends")]
    Overlap { index: usize },
    #[error("entry {index} has a non-finite bearing")]
    BadBearing { index: usize },
}

impl SpeakerScript {
    pub fn new(entries: Vec<SpeakerEntry>) -> Result<Self, ScriptError> {
        let script = Self { entries };
        script.validate()?;
        Ok(script)
    }

    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let script: Self = serde_json::from_str(text).map_err(|e| ScriptError::Json(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    /// Entries must be sorted by start and must not overlap.
    pub fn validate(&self) -> Result<(), ScriptError> {
        for (index, e) in self.entries.iter().enumerate() {
            if !e.bearing_deg.is_finite() {
                return Err(ScriptError::BadBearing { index });
            }
            if index > 0 && e.start_ms < self.entries[index - 1].end_ms() {
                return Err(ScriptError::Overlap { index });
            }
        }
        Ok(())
    }

    /// World bearing of whoever is talking at `t`.
    pub fn bearing_at(&self, t: Millis) -> Option<f64> {
        let idx = self.entries.partition_point(|e| e.start_ms <= t);
        let entry = self.entries[..idx].last()?;
        (t < entry.end_ms()).then_some(entry.bearing_deg)
    }
}

/// Bearing as seen from a robot with heading `theta` (radians), in [-180, 180).
pub fn relative_angle_deg(bearing_deg: f64, theta: f64) -> f64 {
    normalize_deg(bearing_deg - theta.to_degrees())
}
