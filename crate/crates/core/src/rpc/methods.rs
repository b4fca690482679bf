//! Client → daemon methods that act on an [`Engine`].
//!
//! Shared by the live connection loop and trace replay so both paths execute
//! identical logic for the same `(t_ms, method, params)` triple.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use super::envelope::*;
use crate::engine::{Engine, EngineError};
use crate::prompt::{EnabledTypes, PromptError, TaskDescription, TaskSource};
use crate::scheduler::{Millis, SchedulerError};
use crate::session::SessionError;
use crate::workspace::{TextChange, WorkspaceError};

pub const DID_OPEN: &str = "document/didOpen";
pub const DID_CHANGE: &str = "document/didChange";
pub const CURSOR_MOVE: &str = "cursor/didMove";
pub const CHAT_TYPING: &str = "chat/typing";
pub const CHAT_SEND: &str = "chat/sendMessage";
pub const ACCEPT: &str = "suggestions/accept";
pub const DISMISS: &str = "suggestions/dismiss";
pub const TRIGGER: &str = "suggestions/trigger";
pub const CONFIG_UPDATE: &str = "config/update";
pub const GET_STATE: &str = "session/getState";

pub const INITIALIZE: &str = "initialize";
pub const SHUTDOWN: &str = "shutdown";
pub const INJECT_EVENT: &str = "replay/injectEvent";

/// Methods that change engine state; these are what traces record.
pub const ENGINE_METHODS: [&str; 9] = [
    DID_OPEN,
    DID_CHANGE,
    CURSOR_MOVE,
    CHAT_TYPING,
    CHAT_SEND,
    ACCEPT,
    DISMISS,
    TRIGGER,
    CONFIG_UPDATE,
];

pub const NOTIFICATIONS: [&str; 4] = [
    "suggestions/published",
    "suggestions/cleared",
    "chat/messageAppended",
    "cost/updated",
];

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct DidOpen {
    uri: String,
    text: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct DidChange {
    uri: String,
    changes: Vec<TextChange>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CursorMove {
    uri: String,
    offset: usize,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SendMessage {
    text: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Accept {
    suggestion_id: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ConfigUpdate {
    task: Option<String>,
    task_source: Option<TaskSource>,
    enabled_types: Option<Vec<String>>,
    model: Option<String>,
}

fn params<T: DeserializeOwned>(method: &str, p: &Value) -> Result<T, RpcError> {
    serde_json::from_value(p.clone()).map_err(|e| RpcError::invalid_params(format!("{method}: {e}")))
}

pub fn engine_error(e: &EngineError) -> RpcError {
    let code = match e {
        EngineError::Workspace(WorkspaceError::OutOfRange { .. }) => OUT_OF_RANGE,
        EngineError::Workspace(WorkspaceError::UnknownDocument(_)) => UNKNOWN_DOCUMENT,
        EngineError::Workspace(WorkspaceError::ZeroWindow) => INTERNAL_ERROR,
        EngineError::Session(SessionError::UnknownSuggestion(_)) => UNKNOWN_SUGGESTION,
        EngineError::Session(SessionError::AlreadyResolved(_)) => ALREADY_RESOLVED,
        EngineError::Session(SessionError::NoCurrentGroup) => NO_CURRENT_GROUP,
        EngineError::Session(SessionError::EmptyTypeSet) | EngineError::Prompt(PromptError::EmptyTypeSet) => {
            EMPTY_TYPE_SET
        }
        EngineError::Session(SessionError::CorruptLog { .. }) => INTERNAL_ERROR,
        EngineError::Prompt(PromptError::UnknownType(_)) => UNKNOWN_TYPE,
        EngineError::Prompt(PromptError::TaskTooLong { .. }) => TASK_TOO_LONG,
        EngineError::Prompt(PromptError::Asset { .. }) => INTERNAL_ERROR,
        EngineError::Scheduler(SchedulerError::StaleEvent { .. }) => STALE_EVENT,
        EngineError::Scheduler(SchedulerError::InvalidConfig { .. }) => INTERNAL_ERROR,
    };
    RpcError::new(code, e.to_string())
}

fn prompt_error(e: PromptError) -> RpcError {
    engine_error(&EngineError::Prompt(e))
}

/// Applies one engine method at time `now`.
///
/// Returns `Err` with [`METHOD_NOT_FOUND`] for names outside [`ENGINE_METHODS`] and [`GET_STATE`].
pub fn apply(engine: &mut Engine, now: Millis, method: &str, p: &Value) -> Result<Value, RpcError> {
    let map = |r: Result<Value, EngineError>| r.map_err(|e| engine_error(&e));
    match method {
        DID_OPEN => {
            let DidOpen { uri, text } = params(method, p)?;
            map(engine.open_document(now, &uri, &text).map(|()| Value::Null))
        }
        DID_CHANGE => {
            let DidChange { uri, changes } = params(method, p)?;
            map(engine
                .change_document(now, &uri, &changes)
                .map(|version| json!({ "version": version })))
        }
        CURSOR_MOVE => {
            let CursorMove { uri, offset } = params(method, p)?;
            map(engine.move_cursor(now, &uri, offset).map(|()| Value::Null))
        }
        CHAT_TYPING => map(engine.chat_typing(now).map(|()| Value::Null)),
        CHAT_SEND => {
            let SendMessage { text } = params(method, p)?;
            map(engine.send_chat(now, &text).map(|index| json!({ "index": index })))
        }
        ACCEPT => {
            let Accept { suggestion_id } = params(method, p)?;
            map(engine.accept(now, &suggestion_id).map(|index| json!({ "index": index })))
        }
        DISMISS => map(engine.dismiss(now).map(|group_id| json!({ "groupId": group_id }))),
        TRIGGER => map(engine.trigger(now).map(|fired| json!({ "fired": fired }))),
        CONFIG_UPDATE => {
            let u: ConfigUpdate = params(method, p)?;
            let current = engine.session().config().task.clone();
            let task = match (u.task, u.task_source) {
                (None, None) => None,
                (text, source) => Some(
                    TaskDescription::new(
                        text.unwrap_or_else(|| current.text().to_owned()),
                        source.unwrap_or(current.source),
                    )
                    .map_err(prompt_error)?,
                ),
            };
            let enabled = match u.enabled_types {
                None => None,
                Some(labels) => {
                    Some(EnabledTypes::from_labels(&engine.settings().aliases, &labels).map_err(prompt_error)?)
                }
            };
            let changed = map(engine.update_config(now, task, enabled, u.model).map(Value::Bool))?;
            Ok(json!({ "changed": changed, "config": engine.session().config() }))
        }
        GET_STATE => Ok(serde_json::to_value(engine.snapshot()).expect("snapshot serializes")),
        _ => Err(RpcError::new(METHOD_NOT_FOUND, format!("unknown method {method}"))),
    }
}
