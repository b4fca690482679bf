//! Chat history and the suggestion-group lifecycle.
//!
//! A published group is temporary: the next publish discards it unless one of
//! its suggestions was accepted, in which case it stays at the history
//! position where it was first shown. Accepting a suggestion appends an
//! assistant message at the bottom of the history.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{SuggestionGroup, SuggestionState};
use crate::prompt::{EnabledTypes, TaskDescription};
use crate::scheduler::Millis;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("unknown suggestion: {0}")]
    UnknownSuggestion(String),
    #[error("suggestion {0} was already accepted or dismissed")]
    AlreadyResolved(String),
    #[error("no suggestion group is currently displayed")]
    NoCurrentGroup,
    #[error("at least one suggestion type must be enabled")]
    EmptyTypeSet,
    #[error("session log line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Typed,
    AcceptedSuggestion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub body: String,
    pub origin: Origin,
    pub at: Millis,
}

/// A group together with the history length at the moment it was published.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchoredGroup {
    pub group: SuggestionGroup,
    pub anchor: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub task: TaskDescription,
    pub enabled: EnabledTypes,
    pub model: String,
}

impl SessionConfig {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            task: TaskDescription::default(),
            enabled: EnabledTypes::all(),
            model: model.into(),
        }
    }
}

/// What [`SessionState::publish_group`] did with the previously displayed group.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PublishOutcome {
    /// Id of an unretained group that was discarded.
    pub cleared: Option<String>,
    /// Id of a retained group that moved into the history.
    pub retained: Option<String>,
}

/// Replayable record of every state-changing call, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "camelCase")]
pub enum SessionRecord {
    MessageAppended { message: ChatMessage },
    GroupPublished { group: SuggestionGroup },
    SuggestionAccepted { suggestion_id: String, at: Millis },
    GroupDismissed,
    ConfigUpdated { config: SessionConfig },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    messages: Vec<ChatMessage>,
    current: Option<AnchoredGroup>,
    retained: Vec<AnchoredGroup>,
    config: SessionConfig,
    journal: Vec<SessionRecord>,
}

impl SessionState {
    pub fn new(config: SessionConfig) -> Self {
        Self {
            messages: Vec::new(),
            current: None,
            retained: Vec::new(),
            config,
            journal: Vec::new(),
        }
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn current_group(&self) -> Option<&AnchoredGroup> {
        self.current.as_ref()
    }

    pub fn retained_groups(&self) -> &[AnchoredGroup] {
        &self.retained
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Records produced since the last call.
    pub fn take_journal(&mut self) -> Vec<SessionRecord> {
        std::mem::take(&mut self.journal)
    }

    pub fn append_message(&mut self, role: Role, body: impl Into<String>, at: Millis) -> usize {
        let message = ChatMessage {
            role,
            body: body.into(),
            origin: Origin::Typed,
            at,
        };
        self.journal.push(SessionRecord::MessageAppended {
            message: message.clone(),
        });
        self.messages.push(message);
        self.messages.len() - 1
    }

    pub fn publish_group(&mut self, group: SuggestionGroup) -> PublishOutcome {
        self.journal.push(SessionRecord::GroupPublished { group: group.clone() });
        let mut outcome = PublishOutcome::default();
        if let Some(prev) = self.current.take() {
            if prev.group.retained {
                outcome.retained = Some(prev.group.id.clone());
                self.retained.push(prev);
            } else {
                outcome.cleared = Some(prev.group.id);
            }
        }
        self.current = Some(AnchoredGroup {
            group,
            anchor: self.messages.len(),
        });
        outcome
    }

    /// Marks the suggestion accepted, retains its group, and appends the assistant message.
    /// Returns the index of the appended message.
    pub fn accept_suggestion(&mut self, suggestion_id: &str, at: Millis) -> Result<usize, SessionError> {
        let group = self
            .current
            .iter_mut()
            .chain(self.retained.iter_mut())
            .map(|a| &mut a.group)
            .find(|g| g.get(suggestion_id).is_some())
            .ok_or_else(|| SessionError::UnknownSuggestion(suggestion_id.to_owned()))?;
        let suggestion = group.get_mut(suggestion_id).expect("found above");
        if suggestion.state != SuggestionState::Temporary {
            return Err(SessionError::AlreadyResolved(suggestion_id.to_owned()));
        }
        suggestion.state = SuggestionState::Accepted;
        let body = render_accepted(&suggestion.description, &suggestion.code, &suggestion.explanation);
        group.retained = true;
        self.journal.push(SessionRecord::SuggestionAccepted {
            suggestion_id: suggestion_id.to_owned(),
            at,
        });
        self.messages.push(ChatMessage {
            role: Role::Assistant,
            body,
            origin: Origin::AcceptedSuggestion,
            at,
        });
        Ok(self.messages.len() - 1)
    }

    /// Clears the displayed group. A group with accepted items stays in the history.
    pub fn dismiss_group(&mut self) -> Result<String, SessionError> {
        let mut prev = self.current.take().ok_or(SessionError::NoCurrentGroup)?;
        self.journal.push(SessionRecord::GroupDismissed);
        for s in &mut prev.group.suggestions {
            if s.state == SuggestionState::Temporary {
                s.state = SuggestionState::Dismissed;
            }
        }
        let id = prev.group.id.clone();
        if prev.group.retained {
            self.retained.push(prev);
        }
        Ok(id)
    }

    /// Replaces whichever fields are given. Returns whether anything changed.
    pub fn update_config(
        &mut self,
        task: Option<TaskDescription>,
        enabled: Option<EnabledTypes>,
        model: Option<String>,
    ) -> Result<bool, SessionError> {
        if enabled.as_ref().is_some_and(|e| e.is_empty()) {
            return Err(SessionError::EmptyTypeSet);
        }
        let mut next = self.config.clone();
        if let Some(t) = task {
            next.task = t;
        }
        if let Some(e) = enabled {
            next.enabled = e;
        }
        if let Some(m) = model {
            next.model = m;
        }
        if next == self.config {
            return Ok(false);
        }
        self.config = next;
        self.journal.push(SessionRecord::ConfigUpdated {
            config: self.config.clone(),
        });
        Ok(true)
    }

    /// Re-applies one journal record.
    pub fn apply_record(&mut self, record: SessionRecord) -> Result<(), SessionError> {
        match record {
            SessionRecord::MessageAppended { message } => {
                self.journal.push(SessionRecord::MessageAppended {
                    message: message.clone(),
                });
                self.messages.push(message);
            }
            SessionRecord::GroupPublished { group } => {
                self.publish_group(group);
            }
            SessionRecord::SuggestionAccepted { suggestion_id, at } => {
                self.accept_suggestion(&suggestion_id, at)?;
            }
            SessionRecord::GroupDismissed => {
                self.dismiss_group()?;
            }
            SessionRecord::ConfigUpdated { config } => {
                self.config = config.clone();
                self.journal.push(SessionRecord::ConfigUpdated { config });
            }
        }
        Ok(())
    }

    /// Rebuilds a session from a JSONL journal.
    pub fn restore(config: SessionConfig, reader: impl BufRead) -> Result<Self, SessionError> {
        let mut s = Self::new(config);
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| SessionError::CorruptLog {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SessionRecord = serde_json::from_str(&line).map_err(|e| SessionError::CorruptLog {
                line: line_no,
                reason: e.to_string(),
            })?;
            s.apply_record(record).map_err(|e| SessionError::CorruptLog {
                line: line_no,
                reason: e.to_string(),
            })?;
        }
        s.journal.clear();
        Ok(s)
    }
}

/// Layout of an accepted suggestion in the chat: description, code block, explanation.
pub fn render_accepted(description: &str, code: &str, explanation: &str) -> String {
    let mut parts = vec![description.to_owned()];
    if !code.is_empty() {
        parts.push(format!("```\n{code}\n```"));
    }
    if !explanation.is_empty() {
        parts.push(explanation.to_owned());
    }
    parts.join("\n\n")
}

/// Appends journal records to a JSONL sink.
pub fn write_journal(out: &mut impl Write, records: &[SessionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
