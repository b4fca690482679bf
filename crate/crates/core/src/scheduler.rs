//! Refresh logic for proactive requests.
//!
//! A code change (re)arms a debounce deadline; chat activity and suggestion
//! interactions open a longer suppression window and disarm the timer. The
//! machine is a pure transition function over explicit millisecond timestamps:
//! it never reads a clock, so hosts can drive it from a monotonic clock or a
//! trace's virtual clock alike.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds on the session's monotonic (or virtual) clock.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    CodeChange,
    ChatTyping,
    ChatMessageSent,
    SuggestionInteraction,
    SuggestionAccepted,
    ManualTrigger,
    RequestCompleted,
    RequestFailed,
}

impl EventKind {
    /// Kinds that open the long suppression window.
    pub fn is_chat_interaction(self) -> bool {
        matches!(
            self,
            EventKind::ChatTyping
                | EventKind::ChatMessageSent
                | EventKind::SuggestionInteraction
                | EventKind::SuggestionAccepted
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerEvent {
    pub kind: EventKind,
    pub at: Millis,
}

impl SchedulerEvent {
    pub fn new(kind: EventKind, at: Millis) -> Self {
        Self { kind, at }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    None,
    FireRequest,
    CancelInFlight,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedulerError {
    #[error("event at {at} ms precedes last observed time {last} ms")]
    StaleEvent { at: Millis, last: Millis },
    #[error("chat quiet period ({chat} ms) must exceed code quiet period ({code} ms)")]
    InvalidConfig { code: Millis, chat: Millis },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    #[serde(rename = "t_code_quiet_ms")]
    pub t_code_quiet: Millis,
    #[serde(rename = "t_chat_quiet_ms")]
    pub t_chat_quiet: Millis,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            t_code_quiet: 5_000,
            t_chat_quiet: 30_000,
        }
    }
}

impl SchedulerConfig {
    pub fn new(t_code_quiet: Millis, t_chat_quiet: Millis) -> Result<Self, SchedulerError> {
        let cfg = Self {
            t_code_quiet,
            t_chat_quiet,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SchedulerError> {
        if self.t_chat_quiet <= self.t_code_quiet {
            return Err(SchedulerError::InvalidConfig {
                code: self.t_code_quiet,
                chat: self.t_chat_quiet,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub arm_deadline: Option<Millis>,
    pub suppress_until: Millis,
    pub in_flight: bool,
    pub retain_current_group: bool,
    last_seen: Millis,
}

impl SchedulerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Latest timestamp the machine has observed.
    pub fn last_seen(&self) -> Millis {
        self.last_seen
    }

    fn observe(&mut self, at: Millis) -> Result<(), SchedulerError> {
        if at < self.last_seen {
            return Err(SchedulerError::StaleEvent {
                at,
                last: self.last_seen,
            });
        }
        self.last_seen = at;
        Ok(())
    }

    pub fn on_event(&mut self, cfg: &SchedulerConfig, ev: SchedulerEvent) -> Result<Action, SchedulerError> {
        self.observe(ev.at)?;
        let action = match ev.kind {
            EventKind::CodeChange => {
                self.arm_deadline = Some(ev.at + cfg.t_code_quiet);
                if self.in_flight {
                    // the stale request is abandoned; its late completion is ignored upstream
                    self.in_flight = false;
                    Action::CancelInFlight
                } else {
                    Action::None
                }
            }
            EventKind::ChatTyping | EventKind::ChatMessageSent | EventKind::SuggestionInteraction => {
                self.suppress(cfg, ev.at);
                Action::None
            }
            EventKind::SuggestionAccepted => {
                self.retain_current_group = true;
                self.suppress(cfg, ev.at);
                Action::None
            }
            EventKind::ManualTrigger => {
                if self.in_flight {
                    Action::None
                } else {
                    self.arm_deadline = None;
                    self.in_flight = true;
                    Action::FireRequest
                }
            }
            EventKind::RequestCompleted | EventKind::RequestFailed => {
                self.in_flight = false;
                Action::None
            }
        };
        Ok(action)
    }

    fn suppress(&mut self, cfg: &SchedulerConfig, at: Millis) {
        self.suppress_until = self.suppress_until.max(at + cfg.t_chat_quiet);
        self.arm_deadline = None;
    }

    /// Advances to `now`; fires when the debounce deadline and suppression window have both passed.
    /// A `now` earlier than the last observed time is treated as a no-op.
    pub fn tick(&mut self, now: Millis) -> Action {
        if now < self.last_seen {
            return Action::None;
        }
        self.last_seen = now;
        match self.arm_deadline {
            Some(deadline) if now >= deadline && now >= self.suppress_until && !self.in_flight => {
                self.arm_deadline = None;
                self.in_flight = true;
                Action::FireRequest
            }
            _ => Action::None,
        }
    }

    /// Earliest time at which [`tick`](Self::tick) could fire, if any.
    pub fn next_wakeup(&self) -> Option<Millis> {
        if self.in_flight {
            return None;
        }
        self.arm_deadline.map(|d| d.max(self.suppress_until))
    }

    /// Called once a newly published group has replaced the previous one.
    pub fn clear_retain(&mut self) {
        self.retain_current_group = false;
    }
}
