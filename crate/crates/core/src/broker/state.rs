use std::fmt;

use serde::{Deserialize, Serialize};

use crate::genmod::{GenerationResult, VariantSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state")]
pub enum JobState {
    Submitted,
    ProxyRunning,
    ProxyReady,
    VariantSelected,
    OfflineQueued,
    OfflineRunning,
    Completed,
    Failed { reason: String },
    Superseded { by: String },
}

impl JobState {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Submitted => "Submitted",
            Self::ProxyRunning => "ProxyRunning",
            Self::ProxyReady => "ProxyReady",
            Self::VariantSelected => "VariantSelected",
            Self::OfflineQueued => "OfflineQueued",
            Self::OfflineRunning => "OfflineRunning",
            Self::Completed => "Completed",
            Self::Failed { .. } => "Failed",
            Self::Superseded { .. } => "Superseded",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Self::Completed | Self::Failed { .. } | Self::Superseded { .. })
    }

    /// Still waiting on the online phase.
    pub fn is_online(&self) -> bool {
        matches!(self, Self::Submitted | Self::ProxyRunning)
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inputs that drive a job through its states.
#[derive(Debug, Clone, PartialEq)]
pub enum JobEvent {
    Pickup,
    ProxyDone(VariantSet),
    ProxyFailed(String),
    Select(u8),
    Enqueue,
    OfflineStart,
    OfflineDone(GenerationResult),
    OfflineFailed(String),
    Supersede(String),
}

impl JobEvent {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pickup => "Pickup",
            Self::ProxyDone(_) => "ProxyDone",
            Self::ProxyFailed(_) => "ProxyFailed",
            Self::Select(_) => "Select",
            Self::Enqueue => "Enqueue",
            Self::OfflineStart => "OfflineStart",
            Self::OfflineDone(_) => "OfflineDone",
            Self::OfflineFailed(_) => "OfflineFailed",
            Self::Supersede(_) => "Supersede",
        }
    }
}

/// Transition table. `None` means the event is illegal in `state`.
pub fn transition(state: &JobState, event: &JobEvent) -> Option<JobState> {
    use JobState::*;
    let next = match (state, event) {
        (s, JobEvent::Supersede(by)) if !s.is_terminal() => Superseded { by: by.clone() },
        (Submitted, JobEvent::Pickup) => ProxyRunning,
        (ProxyRunning, JobEvent::ProxyDone(_)) => ProxyReady,
        (ProxyRunning, JobEvent::ProxyFailed(reason)) => Failed { reason: reason.clone() },
        (ProxyReady, JobEvent::Select(_)) => VariantSelected,
        (VariantSelected, JobEvent::Enqueue) => OfflineQueued,
        (OfflineQueued, JobEvent::OfflineStart) => OfflineRunning,
        (OfflineRunning, JobEvent::OfflineDone(_)) => Completed,
        (OfflineRunning, JobEvent::OfflineFailed(reason)) => Failed { reason: reason.clone() },
        _ => return None,
    };
    Some(next)
}

/// Allowed `(from, to)` state-name pairs.
pub const TRANSITION_TABLE: [(&str, &str); 14] = [
    ("Submitted", "ProxyRunning"),
    ("ProxyRunning", "ProxyReady"),
    ("ProxyRunning", "Failed"),
    ("ProxyReady", "VariantSelected"),
    ("VariantSelected", "OfflineQueued"),
    ("OfflineQueued", "OfflineRunning"),
    ("OfflineRunning", "Completed"),
    ("OfflineRunning", "Failed"),
    ("Submitted", "Superseded"),
    ("ProxyRunning", "Superseded"),
    ("ProxyReady", "Superseded"),
    ("VariantSelected", "Superseded"),
    ("OfflineQueued", "Superseded"),
    ("OfflineRunning", "Superseded"),
];
