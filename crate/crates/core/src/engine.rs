//! The per-session event path.
//!
//! [`Engine`] owns the workspace mirror, scheduler, chat session and cost
//! ledger, and performs no I/O. Hosts feed it timestamped inputs, call
//! [`Engine::tick`] at [`Engine::next_wakeup`], run the provider requests it
//! asks for, and deliver outcomes back through [`Engine::provider_done`].
//! Everything it wants done is queued as an [`Effect`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineSettings;
use crate::cost::{CostLedger, LedgerTotals, RequestPurpose};
use crate::parser::{parse_response, ParseError, SuggestionGroup};
use crate::prompt::{build_prompt, EnabledTypes, PromptBundle, PromptError, TaskDescription};
use crate::provider::{ChatTurn, ProviderError, ProviderResponse, RequestPayload};
use crate::scheduler::{Action, EventKind, Millis, SchedulerError, SchedulerEvent, SchedulerState};
use crate::session::{AnchoredGroup, ChatMessage, Role, SessionConfig, SessionError, SessionRecord, SessionState};
use crate::workspace::{TextChange, Workspace, WorkspaceError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
}

/// Daemon → client notifications.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", content = "params", rename_all_fields = "camelCase")]
pub enum Notification {
    #[serde(rename = "suggestions/published")]
    SuggestionsPublished { group: SuggestionGroup, anchor: usize },
    #[serde(rename = "suggestions/cleared")]
    SuggestionsCleared { group_id: String },
    #[serde(rename = "chat/messageAppended")]
    ChatMessageAppended { index: usize, message: ChatMessage },
    #[serde(rename = "cost/updated")]
    CostUpdated { totals: LedgerTotals },
}

impl Notification {
    pub fn method(&self) -> &'static str {
        match self {
            Notification::SuggestionsPublished { .. } => "suggestions/published",
            Notification::SuggestionsCleared { .. } => "suggestions/cleared",
            Notification::ChatMessageAppended { .. } => "chat/messageAppended",
            Notification::CostUpdated { .. } => "cost/updated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    pub request_id: u64,
    pub payload: RequestPayload,
    pub model: String,
    pub max_output_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Notify(Notification),
    Dispatch(Dispatch),
    Cancel { request_id: u64 },
    Persist(Vec<SessionRecord>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimelineEvent {
    Fired { manual: bool },
    Retried,
    Published { group_id: String, size: usize },
    Cancelled,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub t_ms: Millis,
    #[serde(flatten)]
    pub event: TimelineEvent,
}

/// Proactive cycle counters. Every fired cycle ends exactly one way.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStats {
    pub fired: u64,
    pub manual_fired: u64,
    pub published: u64,
    pub cancelled: u64,
    pub failed: u64,
    pub parse_retries: u64,
    pub code_changes: u64,
    pub proactive_input_tokens: u64,
    pub proactive_output_tokens: u64,
    pub timeline: Vec<TimelineEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSnapshot {
    pub messages: Vec<ChatMessage>,
    pub current_group: Option<AnchoredGroup>,
    pub retained_groups: Vec<AnchoredGroup>,
    pub config: SessionConfig,
}

#[derive(Debug, Clone)]
struct InFlight {
    request_id: u64,
    bundle: PromptBundle,
    attempt: u8,
}

pub struct Engine {
    settings: EngineSettings,
    workspace: Workspace,
    scheduler: SchedulerState,
    session: SessionState,
    ledger: CostLedger,
    proactive: Option<InFlight>,
    chat_pending: Vec<u64>,
    next_request: u64,
    next_group: u64,
    last_time: Millis,
    effects: Vec<Effect>,
    stats: EngineStats,
}

impl Engine {
    pub fn new(settings: EngineSettings) -> Self {
        let session = SessionState::new(SessionConfig::new(settings.model.clone()));
        Self::with_session(settings, session)
    }

    /// Starts from a previously restored session.
    pub fn with_session(settings: EngineSettings, session: SessionState) -> Self {
        // restored groups keep their ids; new ones must not collide
        let next_group = session
            .current_group()
            .into_iter()
            .chain(session.retained_groups())
            .filter_map(|g| g.group.id.strip_prefix('g')?.parse::<u64>().ok())
            .max()
            .map_or(1, |n| n + 1);
        Self {
            settings,
            workspace: Workspace::new(),
            scheduler: SchedulerState::new(),
            session,
            ledger: CostLedger::new(),
            proactive: None,
            chat_pending: Vec::new(),
            next_request: 1,
            next_group,
            last_time: 0,
            effects: Vec::new(),
            stats: EngineStats::default(),
        }
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn session(&self) -> &SessionState {
        &self.session
    }

    pub fn scheduler(&self) -> &SchedulerState {
        &self.scheduler
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn last_time(&self) -> Millis {
        self.last_time
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            messages: self.session.messages().to_vec(),
            current_group: self.session.current_group().cloned(),
            retained_groups: self.session.retained_groups().to_vec(),
            config: self.session.config().clone(),
        }
    }

    pub fn drain_effects(&mut self) -> Vec<Effect> {
        std::mem::take(&mut self.effects)
    }

    /// Earliest time a tick could fire a proactive request.
    pub fn next_wakeup(&self) -> Option<Millis> {
        self.scheduler.next_wakeup()
    }

    /// Whether a proactive or chat request is outstanding.
    pub fn has_pending_requests(&self) -> bool {
        self.proactive.is_some() || !self.chat_pending.is_empty()
    }

    fn observe(&mut self, now: Millis) -> Result<(), EngineError> {
        if now < self.last_time {
            return Err(SchedulerError::StaleEvent {
                at: now,
                last: self.last_time,
            }
            .into());
        }
        self.last_time = now;
        Ok(())
    }

    fn notify(&mut self, n: Notification) {
        self.effects.push(Effect::Notify(n));
    }

    fn persist(&mut self) {
        let records = self.session.take_journal();
        if !records.is_empty() {
            self.effects.push(Effect::Persist(records));
        }
    }

    fn sched(&mut self, kind: EventKind, now: Millis) -> Action {
        self.scheduler
            .on_event(&self.settings.scheduler, SchedulerEvent::new(kind, now))
            .expect("engine enforces monotonic time before reaching the scheduler")
    }

    fn timeline(&mut self, t_ms: Millis, event: TimelineEvent) {
        self.stats.timeline.push(TimelineEntry { t_ms, event });
    }

    fn alloc_request(&mut self) -> u64 {
        let id = self.next_request;
        self.next_request += 1;
        id
    }

    pub fn open_document(&mut self, now: Millis, uri: &str, text: &str) -> Result<(), EngineError> {
        self.observe(now)?;
        self.workspace.open(uri, text);
        Ok(())
    }

    /// Applies an edit batch and signals a code change. A change in flight cancels the request.
    pub fn change_document(&mut self, now: Millis, uri: &str, changes: &[TextChange]) -> Result<u64, EngineError> {
        self.observe(now)?;
        let version = self.workspace.apply_changes(uri, changes)?;
        self.stats.code_changes += 1;
        if self.sched(EventKind::CodeChange, now) == Action::CancelInFlight {
            if let Some(f) = self.proactive.take() {
                self.effects.push(Effect::Cancel {
                    request_id: f.request_id,
                });
                self.stats.cancelled += 1;
                self.timeline(now, TimelineEvent::Cancelled);
            }
        }
        Ok(version)
    }

    /// Cursor movement updates the context source only; it is not a scheduler event.
    pub fn move_cursor(&mut self, now: Millis, uri: &str, offset: usize) -> Result<(), EngineError> {
        self.observe(now)?;
        self.workspace.move_cursor(uri, offset)?;
        Ok(())
    }

    pub fn chat_typing(&mut self, now: Millis) -> Result<(), EngineError> {
        self.observe(now)?;
        self.sched(EventKind::ChatTyping, now);
        Ok(())
    }

    /// Appends the user's message and forwards the history to the provider.
    pub fn send_chat(&mut self, now: Millis, text: &str) -> Result<usize, EngineError> {
        self.observe(now)?;
        let index = self.session.append_message(Role::User, text, now);
        let message = self.session.messages()[index].clone();
        self.notify(Notification::ChatMessageAppended { index, message });
        self.persist();
        self.sched(EventKind::ChatMessageSent, now);

        let turns = self
            .session
            .messages()
            .iter()
            .map(|m| ChatTurn {
                role: m.role,
                content: m.body.clone(),
            })
            .collect();
        let request_id = self.alloc_request();
        self.chat_pending.push(request_id);
        self.effects.push(Effect::Dispatch(Dispatch {
            request_id,
            payload: RequestPayload::Chat { turns },
            model: self.session.config().model.clone(),
            max_output_tokens: self.settings.max_output_tokens,
        }));
        Ok(index)
    }

    pub fn accept(&mut self, now: Millis, suggestion_id: &str) -> Result<usize, EngineError> {
        self.observe(now)?;
        let index = self.session.accept_suggestion(suggestion_id, now)?;
        let message = self.session.messages()[index].clone();
        self.notify(Notification::ChatMessageAppended { index, message });
        self.persist();
        self.sched(EventKind::SuggestionAccepted, now);
        Ok(index)
    }

    pub fn dismiss(&mut self, now: Millis) -> Result<String, EngineError> {
        self.observe(now)?;
        let group_id = self.session.dismiss_group()?;
        self.notify(Notification::SuggestionsCleared {
            group_id: group_id.clone(),
        });
        self.persist();
        self.sched(EventKind::SuggestionInteraction, now);
        Ok(group_id)
    }

    /// Manual refresh. Returns whether a request was started.
    pub fn trigger(&mut self, now: Millis) -> Result<bool, EngineError> {
        self.observe(now)?;
        if self.sched(EventKind::ManualTrigger, now) == Action::FireRequest {
            return Ok(self.start_proactive(now, true));
        }
        Ok(false)
    }

    pub fn update_config(
        &mut self,
        now: Millis,
        task: Option<TaskDescription>,
        enabled: Option<EnabledTypes>,
        model: Option<String>,
    ) -> Result<bool, EngineError> {
        self.observe(now)?;
        let changed = self.session.update_config(task, enabled, model)?;
        self.persist();
        Ok(changed)
    }

    /// Fires a due proactive request, if any.
    pub fn tick(&mut self, now: Millis) -> Result<bool, EngineError> {
        self.observe(now)?;
        if self.scheduler.tick(now) == Action::FireRequest {
            return Ok(self.start_proactive(now, false));
        }
        Ok(false)
    }

    fn start_proactive(&mut self, now: Millis, manual: bool) -> bool {
        self.stats.fired += 1;
        self.stats.manual_fired += manual as u64;
        self.timeline(now, TimelineEvent::Fired { manual });
        let bundle = match self.workspace.active_context(self.settings.window) {
            None => Err("no open document".to_owned()),
            Some(Err(e)) => Err(e.to_string()),
            Some(Ok(ctx)) => {
                let cfg = self.session.config();
                build_prompt(
                    &ctx,
                    self.session.messages(),
                    &cfg.task,
                    &cfg.enabled,
                    &self.settings.prompt,
                    &cfg.model,
                )
                .map_err(|e| e.to_string())
            }
        };
        match bundle {
            Ok(bundle) => {
                self.dispatch_proactive(bundle, 1);
                true
            }
            Err(reason) => {
                self.fail_cycle(now, reason);
                false
            }
        }
    }

    fn dispatch_proactive(&mut self, bundle: PromptBundle, attempt: u8) {
        let request_id = self.alloc_request();
        self.effects.push(Effect::Dispatch(Dispatch {
            request_id,
            payload: RequestPayload::Proactive(bundle.clone()),
            model: bundle.model.clone(),
            max_output_tokens: self.settings.max_output_tokens,
        }));
        self.proactive = Some(InFlight {
            request_id,
            bundle,
            attempt,
        });
    }

    fn fail_cycle(&mut self, now: Millis, reason: String) {
        self.proactive = None;
        self.stats.failed += 1;
        self.timeline(now, TimelineEvent::Failed { reason });
        self.sched(EventKind::RequestFailed, now);
    }

    fn record_usage(&mut self, request_id: u64, purpose: RequestPurpose, model: &str, resp: &ProviderResponse) {
        self.ledger.record(
            &self.settings.pricing,
            request_id,
            purpose,
            model,
            resp.usage.input_tokens,
            resp.usage.output_tokens,
            resp.usage.estimated,
        );
        if purpose == RequestPurpose::Proactive {
            self.stats.proactive_input_tokens += resp.usage.input_tokens;
            self.stats.proactive_output_tokens += resp.usage.output_tokens;
        }
        self.notify(Notification::CostUpdated {
            totals: self.ledger.totals(),
        });
    }

    /// Delivers a provider outcome. Outcomes for cancelled or unknown requests are ignored.
    pub fn provider_done(
        &mut self,
        now: Millis,
        request_id: u64,
        outcome: Result<ProviderResponse, ProviderError>,
    ) -> Result<(), EngineError> {
        self.observe(now)?;
        if let Some(pos) = self.chat_pending.iter().position(|&id| id == request_id) {
            self.chat_pending.remove(pos);
            self.finish_chat(now, request_id, outcome);
            return Ok(());
        }
        let Some(flight) = self.proactive.take_if(|f| f.request_id == request_id) else {
            tracing::debug!(request_id, "dropping outcome for a request that is no longer current");
            return Ok(());
        };
        match outcome {
            Ok(resp) => {
                let model = flight.bundle.model.clone();
                self.record_usage(request_id, RequestPurpose::Proactive, &model, &resp);
                let group_id = format!("g{}", self.next_group);
                let enabled = self.session.config().enabled.clone();
                match parse_response(&resp.raw, &enabled, &self.settings.aliases, &group_id, now) {
                    Ok(parsed) => {
                        for w in &parsed.warnings {
                            tracing::warn!(?w, group = %group_id, "dropped suggestion item");
                        }
                        self.next_group += 1;
                        self.publish(now, parsed.group);
                    }
                    Err(ParseError::ParseFailure(reason)) if flight.attempt == 1 => {
                        tracing::info!(%reason, "unparseable suggestions, regenerating once");
                        self.stats.parse_retries += 1;
                        self.timeline(now, TimelineEvent::Retried);
                        self.dispatch_proactive(flight.bundle, 2);
                    }
                    Err(e) => self.fail_cycle(now, e.to_string()),
                }
            }
            Err(ProviderError::Cancelled) => {
                self.stats.cancelled += 1;
                self.timeline(now, TimelineEvent::Cancelled);
                self.sched(EventKind::RequestFailed, now);
            }
            Err(e) => self.fail_cycle(now, e.to_string()),
        }
        Ok(())
    }

    fn publish(&mut self, now: Millis, group: SuggestionGroup) {
        let size = group.suggestions.len();
        let group_id = group.id.clone();
        let outcome = self.session.publish_group(group);
        if let Some(cleared) = outcome.cleared {
            self.notify(Notification::SuggestionsCleared { group_id: cleared });
        }
        let current = self.session.current_group().expect("just published").clone();
        self.notify(Notification::SuggestionsPublished {
            group: current.group,
            anchor: current.anchor,
        });
        self.persist();
        self.stats.published += 1;
        self.timeline(now, TimelineEvent::Published { group_id, size });
        self.sched(EventKind::RequestCompleted, now);
        self.scheduler.clear_retain();
    }

    fn finish_chat(&mut self, now: Millis, request_id: u64, outcome: Result<ProviderResponse, ProviderError>) {
        match outcome {
            Ok(resp) => {
                let model = self.session.config().model.clone();
                self.record_usage(request_id, RequestPurpose::Chat, &model, &resp);
                let index = self.session.append_message(Role::Assistant, resp.raw, now);
                let message = self.session.messages()[index].clone();
                self.notify(Notification::ChatMessageAppended { index, message });
                self.persist();
            }
            Err(e) => tracing::warn!(request_id, error = %e, "chat request failed"),
        }
    }

    /// Cancels everything outstanding, e.g. on shutdown.
    pub fn cancel_all(&mut self) {
        if let Some(f) = self.proactive.take() {
            self.effects.push(Effect::Cancel {
                request_id: f.request_id,
            });
            self.stats.cancelled += 1;
            let now = self.last_time;
            self.timeline(now, TimelineEvent::Cancelled);
            self.sched(EventKind::RequestFailed, now);
        }
        for request_id in std::mem::take(&mut self.chat_pending) {
            self.effects.push(Effect::Cancel { request_id });
        }
    }
}
