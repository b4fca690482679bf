//! One client session: an [`Engine`] driven by a monotonic clock.
//!
//! Inbound frames arrive on a channel fed by a reader task, so partial reads are
//! never lost when another `select!` branch wins. Provider calls run as spawned
//! tasks and report back on a second channel. Notifications caused by a request
//! are written before that request's response.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::future::Future;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use tokio::sync::mpsc;
use tokio::time::Instant;
use tokio_util::sync::CancellationToken;

use super::envelope::*;
use super::methods::{self, ENGINE_METHODS, INITIALIZE, INJECT_EVENT, NOTIFICATIONS, SHUTDOWN};
use crate::config::EngineSettings;
use crate::engine::{Effect, Engine, EngineStats};
use crate::cost::LedgerTotals;
use crate::prompt::SuggestionType;
use crate::provider::{Provider, ProviderError, ProviderRequest, ProviderResponse};
use crate::replay::{TraceEvent, TRACE_END};
use crate::scheduler::Millis;
use crate::session::{write_journal, SessionConfig, SessionError, SessionState};

pub const PROTOCOL_VERSION: u64 = 1;

/// What a transport reader delivers to the session loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inbound {
    Text(String),
    /// Undecodable frame; answered with a parse error.
    Malformed(String),
}

/// Outbound half of a transport. One call writes one complete message.
pub trait FrameSink: Send {
    fn send(&mut self, text: String) -> impl Future<Output = io::Result<()>> + Send;
}

/// Settings shared by every session a daemon runs.
#[derive(Clone)]
pub struct DaemonOptions {
    pub settings: EngineSettings,
    pub provider: Arc<dyn Provider>,
    pub allow_injection: bool,
    /// Append-only session journal; restored from on start if present.
    pub session_log: Option<PathBuf>,
    /// Records inbound engine methods as a replayable trace.
    pub record: Option<PathBuf>,
}

impl DaemonOptions {
    pub fn new(settings: EngineSettings, provider: Arc<dyn Provider>) -> Self {
        Self {
            settings,
            provider,
            allow_injection: false,
            session_log: None,
            record: None,
        }
    }
}

/// How a session ended, for logging and tests.
#[derive(Debug, Clone)]
pub struct SessionSummary {
    pub session_id: String,
    pub stats: EngineStats,
    pub totals: LedgerTotals,
    pub clean_shutdown: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionStartError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("cannot restore session from {path}: {source}")]
    Restore {
        path: String,
        #[source]
        source: SessionError,
    },
}

fn open_append(path: &Path) -> Result<File, SessionStartError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| SessionStartError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn restore_engine(settings: &EngineSettings, log: Option<&Path>) -> Result<Engine, SessionStartError> {
    let fresh = SessionConfig::new(settings.model.clone());
    let Some(path) = log.filter(|p| p.exists()) else {
        return Ok(Engine::new(settings.clone()));
    };
    let file = File::open(path).map_err(|source| SessionStartError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let session = SessionState::restore(fresh, BufReader::new(file)).map_err(|source| SessionStartError::Restore {
        path: path.display().to_string(),
        source,
    })?;
    tracing::info!(path = %path.display(), messages = session.messages().len(), "restored session");
    Ok(Engine::with_session(settings.clone(), session))
}

enum Flow {
    Continue,
    Shutdown,
}

struct Session<S> {
    id: String,
    opts: DaemonOptions,
    engine: Engine,
    sink: S,
    initialized: bool,
    start: Instant,
    /// Added to wall time so injected events can move the clock forward.
    offset: Millis,
    tokens: HashMap<u64, CancellationToken>,
    done_tx: mpsc::UnboundedSender<(u64, Result<ProviderResponse, ProviderError>)>,
    log: Option<File>,
    trace: Option<File>,
}

impl<S: FrameSink> Session<S> {
    fn now(&self) -> Millis {
        self.start.elapsed().as_millis() as Millis + self.offset
    }

    fn deadline(&self, t: Millis) -> Instant {
        self.start + Duration::from_millis(t.saturating_sub(self.offset))
    }

    async fn send(&mut self, v: Value) -> io::Result<()> {
        self.sink.send(v.to_string()).await
    }

    async fn flush_effects(&mut self) -> io::Result<()> {
        loop {
            let effects = self.engine.drain_effects();
            if effects.is_empty() {
                return Ok(());
            }
            for effect in effects {
                match effect {
                    Effect::Notify(n) => {
                        let mut v = serde_json::to_value(&n).expect("notification serializes");
                        v["jsonrpc"] = json!("2.0");
                        self.send(v).await?;
                    }
                    Effect::Dispatch(d) => {
                        let token = CancellationToken::new();
                        self.tokens.insert(d.request_id, token.clone());
                        let req = ProviderRequest {
                            id: d.request_id,
                            payload: d.payload,
                            model: d.model,
                            max_output_tokens: d.max_output_tokens,
                            cancel: token,
                        };
                        let provider = Arc::clone(&self.opts.provider);
                        let tx = self.done_tx.clone();
                        tokio::spawn(async move {
                            let out = provider.complete(&req).await;
                            let _ = tx.send((req.id, out));
                        });
                    }
                    Effect::Cancel { request_id } => {
                        if let Some(t) = self.tokens.remove(&request_id) {
                            t.cancel();
                        }
                    }
                    Effect::Persist(records) => {
                        if let Some(log) = &mut self.log {
                            if let Err(e) = write_journal(log, &records).and_then(|()| log.flush()) {
                                tracing::error!(error = %e, "session log write failed");
                            }
                        }
                    }
                }
            }
        }
    }

    fn record(&mut self, t_ms: Millis, event: &str, payload: &Value) {
        if let Some(trace) = &mut self.trace {
            let line = serde_json::to_string(&TraceEvent {
                t_ms,
                event: event.to_owned(),
                payload: payload.clone(),
            })
            .expect("trace event serializes");
            if let Err(e) = writeln!(trace, "{line}").and_then(|()| trace.flush()) {
                tracing::error!(error = %e, "trace write failed");
            }
        }
    }

    async fn reply(&mut self, id: Option<RequestId>, result: Result<Value, RpcError>) -> io::Result<()> {
        match (id, result) {
            (Some(id), Ok(v)) => self.send(response(&id, v)).await,
            (Some(id), Err(e)) => self.send(error_response(Some(&id), &e)).await,
            (None, Ok(_)) => Ok(()),
            (None, Err(e)) => {
                tracing::warn!(code = e.code, message = %e.message, "notification failed");
                Ok(())
            }
        }
    }

    fn initialize(&mut self, params: &Value) -> Result<Value, RpcError> {
        if self.initialized {
            return Err(RpcError::new(INVALID_REQUEST, "session already initialized"));
        }
        match params.get("protocolVersion").and_then(Value::as_u64) {
            Some(PROTOCOL_VERSION) => {}
            Some(v) => {
                return Err(RpcError::invalid_params(format!(
                    "unsupported protocolVersion {v}; this daemon speaks {PROTOCOL_VERSION}"
                )))
            }
            None => return Err(RpcError::invalid_params("initialize: missing protocolVersion")),
        }
        self.initialized = true;
        let mut methods: Vec<&str> = ENGINE_METHODS.to_vec();
        methods.extend([methods::GET_STATE, SHUTDOWN]);
        if self.opts.allow_injection {
            methods.push(INJECT_EVENT);
        }
        let types: Vec<Value> = SuggestionType::ALL
            .iter()
            .map(|t| json!({ "id": t.id(), "label": t.label() }))
            .collect();
        Ok(json!({
            "protocolVersion": PROTOCOL_VERSION,
            "sessionId": self.id,
            "capabilities": {
                "methods": methods,
                "notifications": NOTIFICATIONS,
                "suggestionTypes": types,
                "replayInjection": self.opts.allow_injection,
            },
            "state": self.engine.snapshot(),
        }))
    }

    fn inject(&mut self, params: &Value) -> Result<Value, RpcError> {
        if !self.opts.allow_injection {
            return Err(RpcError::new(METHOD_NOT_FOUND, "replay/injectEvent is disabled"));
        }
        let ev: TraceEvent = serde_json::from_value(params.clone())
            .map_err(|e| RpcError::invalid_params(format!("replay/injectEvent: {e}")))?;
        if !ENGINE_METHODS.contains(&ev.event.as_str()) {
            return Err(RpcError::invalid_params(format!("cannot inject {}", ev.event)));
        }
        let now = self.now();
        if ev.t_ms > now {
            self.offset += ev.t_ms - now;
        }
        methods::apply(&mut self.engine, ev.t_ms, &ev.event, &ev.payload)
    }

    async fn handle(&mut self, inbound: Inbound) -> io::Result<Flow> {
        let text = match inbound {
            Inbound::Text(t) => t,
            Inbound::Malformed(reason) => {
                let err = RpcError::new(PARSE_ERROR, format!("malformed frame: {reason}"));
                self.send(error_response(None, &err)).await?;
                return Ok(Flow::Continue);
            }
        };
        let msg = match decode(&text) {
            Decoded::Message(m) => m,
            Decoded::Invalid { id, error } => {
                self.send(error_response(id.as_ref(), &error)).await?;
                return Ok(Flow::Continue);
            }
            Decoded::Ignored => return Ok(Flow::Continue),
        };
        let Incoming { id, method, params } = msg;
        if method == SHUTDOWN {
            self.reply(id, Ok(Value::Null)).await?;
            return Ok(Flow::Shutdown);
        }
        if method == INITIALIZE {
            let r = self.initialize(&params);
            self.reply(id, r).await?;
            return Ok(Flow::Continue);
        }
        if !self.initialized {
            let err = RpcError::new(NOT_INITIALIZED, "initialize must be called first");
            self.reply(id, Err(err)).await?;
            return Ok(Flow::Continue);
        }
        let result = if method == INJECT_EVENT {
            self.inject(&params)
        } else {
            let now = self.now();
            if ENGINE_METHODS.contains(&method.as_str()) {
                self.record(now, &method, &params);
            }
            methods::apply(&mut self.engine, now, &method, &params)
        };
        self.flush_effects().await?;
        self.reply(id, result).await?;
        Ok(Flow::Continue)
    }

    async fn run(&mut self, mut inbound: mpsc::Receiver<Inbound>) -> io::Result<bool> {
        let (done_tx, mut done_rx) = mpsc::unbounded_channel();
        self.done_tx = done_tx;
        loop {
            let wake = if self.initialized { self.engine.next_wakeup() } else { None };
            let deadline = wake.map(|t| self.deadline(t));
            tokio::select! {
                biased;
                frame = inbound.recv() => match frame {
                    None => return Ok(false),
                    Some(f) => {
                        if let Flow::Shutdown = self.handle(f).await? {
                            return Ok(true);
                        }
                    }
                },
                Some((request_id, outcome)) = done_rx.recv() => {
                    self.tokens.remove(&request_id);
                    let now = self.now();
                    if let Err(e) = self.engine.provider_done(now, request_id, outcome) {
                        tracing::error!(error = %e, "provider outcome rejected");
                    }
                    self.flush_effects().await?;
                }
                _ = sleep_until(deadline) => {
                    let now = self.now().max(wake.unwrap_or(0));
                    if let Err(e) = self.engine.tick(now) {
                        tracing::error!(error = %e, "tick rejected");
                    }
                    self.flush_effects().await?;
                }
            }
        }
    }

    async fn close(&mut self) {
        self.engine.cancel_all();
        // the transport may already be gone; only cancellation and persistence matter here
        let _ = self.flush_effects().await;
        for (_, t) in self.tokens.drain() {
            t.cancel();
        }
        let now = self.now().max(self.engine.last_time());
        self.record(now, TRACE_END, &json!({}));
    }
}

async fn sleep_until(deadline: Option<Instant>) {
    match deadline {
        Some(d) => tokio::time::sleep_until(d).await,
        None => std::future::pending().await,
    }
}

/// Runs one session until the client shuts down or the transport closes.
pub async fn run_session<S: FrameSink>(
    opts: DaemonOptions,
    session_id: String,
    inbound: mpsc::Receiver<Inbound>,
    sink: S,
) -> Result<SessionSummary, SessionStartError> {
    let engine = restore_engine(&opts.settings, opts.session_log.as_deref())?;
    let log = opts.session_log.as_deref().map(open_append).transpose()?;
    let trace = opts
        .record
        .as_deref()
        .map(|p| {
            File::create(p).map_err(|source| SessionStartError::Io {
                path: p.display().to_string(),
                source,
            })
        })
        .transpose()?;
    let (done_tx, _) = mpsc::unbounded_channel();
    let mut session = Session {
        id: session_id,
        opts,
        engine,
        sink,
        initialized: false,
        start: Instant::now(),
        offset: 0,
        tokens: HashMap::new(),
        done_tx,
        log,
        trace,
    };
    let clean = match session.run(inbound).await {
        Ok(clean) => clean,
        Err(e) => {
            tracing::info!(error = %e, "transport closed while writing");
            false
        }
    };
    session.close().await;
    tracing::info!(session = %session.id, clean, "session ended");
    Ok(SessionSummary {
        session_id: session.id,
        stats: session.engine.stats().clone(),
        totals: session.engine.ledger().totals(),
        clean_shutdown: clean,
    })
}
