//! Command status queue entries and their lifecycle automaton.

use serde::{Deserialize, Serialize};

use crate::proto::Command;
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Master,
    Planner,
    Speaker,
    Emergency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Queued,
    Dispatched,
    Delivered,
    Executing,
    Completed,
    Failed,
    TimedOut,
    Cancelled,
}

impl RecordStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Completed | Self::Failed | Self::TimedOut | Self::Cancelled)
    }

    /// Dispatched, Delivered or Executing.
    pub fn is_in_flight(self) -> bool {
        matches!(self, Self::Dispatched | Self::Delivered | Self::Executing)
    }

    /// The legal-transition relation of the command lifecycle.
    pub fn can_transition_to(self, next: RecordStatus) -> bool {
        use RecordStatus::*;
        matches!(
            (self, next),
            (Queued, Dispatched)
                | (Queued, Cancelled)
                | (Dispatched, Delivered)
                | (Dispatched, TimedOut)
                | (Dispatched, Failed)
                | (Delivered, Executing)
                | (Delivered, TimedOut)
                | (Delivered, Failed)
                | (Executing, Completed)
                | (Executing, Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub status: RecordStatus,
    pub t_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandRecord {
    pub id: u64,
    pub source: Source,
    pub command: Command,
    pub seq: Option<u32>,
    pub status: RecordStatus,
    /// Reason for Failed, TimedOut and Cancelled records.
    pub detail: Option<String>,
    pub transitions: Vec<Transition>,
}

impl CommandRecord {
    pub fn new(id: u64, source: Source, command: Command, now: Millis) -> Self {
        Self {
            id,
            source,
            command,
            seq: None,
            status: RecordStatus::Queued,
            detail: None,
            transitions: vec![Transition { status: RecordStatus::Queued, t_ms: now }],
        }
    }

    /// Moves to `next` if the automaton allows it.
    pub fn advance(&mut self, next: RecordStatus, detail: Option<String>, now: Millis) -> bool {
        if !self.status.can_transition_to(next) {
            return false;
        }
        self.status = next;
        if detail.is_some() {
            self.detail = detail;
        }
        self.transitions.push(Transition { status: next, t_ms: now });
        true
    }

    pub fn dispatched_at(&self) -> Option<Millis> {
        self.transitions.iter().find(|t| t.status == RecordStatus::Dispatched).map(|t| t.t_ms)
    }

    pub fn finished_at(&self) -> Option<Millis> {
        self.transitions.last().filter(|t| t.status.is_terminal()).map(|t| t.t_ms)
    }
}

/// Checks a whole transition sequence against the automaton, starting from
/// Queued.
pub fn accepts(statuses: &[RecordStatus]) -> bool {
    match statuses.split_first() {
        Some((RecordStatus::Queued, rest)) => {
            let mut cur = RecordStatus::Queued;
            for &next in rest {
                if !cur.can_transition_to(next) {
                    return false;
                }
                cur = next;
            }
            true
        }
        _ => false,
    }
}
