//! Deterministic trace replay on a virtual clock.
//!
//! A trace is JSONL, one [`TraceEvent`] per line, with `event` naming an
//! engine method (`document/didChange`, `chat/typing`, ...) and `payload`
//! holding its params. The optional final `trace/end` line sets the horizon.
//!
//! The clock moves only to the next interesting instant: a mock completion, a
//! trace event, or the engine's wakeup. At equal times completions run first,
//! then trace events, then ticks, so an edit landing exactly on a deadline
//! re-arms the debounce instead of racing it. Past the horizon, outstanding
//! requests drain but no new proactive request fires.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::{Config, EngineSettings};
use crate::cost::{
    input_dominated_ratio, proactivity_multiplier, request_cost, LedgerTotals, Money, RequestPurpose, UsageScenario,
    AUTOCOMPLETE_SUBSCRIPTION_USD,
};
use crate::engine::{Effect, Engine, TimelineEntry, TimelineEvent};
use crate::provider::{MockProvider, ProviderError, ProviderResponse};
use crate::rpc::methods::{self, ENGINE_METHODS, GET_STATE};
use crate::scheduler::Millis;

pub const TRACE_END: &str = "trace/end";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_ms: Millis,
    pub event: String,
    #[serde(default = "empty_object")]
    pub payload: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("trace line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },
    #[error("trace line {line}: t_ms {t_ms} is earlier than the previous event at {previous}")]
    NonMonotonicTime { line: usize, t_ms: Millis, previous: Millis },
    #[error("cannot read trace: {0}")]
    Io(#[from] std::io::Error),
}

impl ReplayError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ReplayError::MalformedTrace { line, .. } | ReplayError::NonMonotonicTime { line, .. } => Some(*line),
            ReplayError::Io(_) => None,
        }
    }
}

/// Parses and validates a trace. Blank lines are skipped; line numbers are 1-based.
pub fn parse_trace(reader: impl BufRead) -> Result<Vec<TraceEvent>, ReplayError> {
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut ended = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| ReplayError::MalformedTrace { line: line_no, reason };
        if ended {
            return Err(malformed(format!("event after {TRACE_END}")));
        }
        let ev: TraceEvent = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if !ev.payload.is_object() {
            return Err(malformed("payload must be an object".into()));
        }
        let known = ev.event == TRACE_END || ev.event == GET_STATE || ENGINE_METHODS.contains(&ev.event.as_str());
        if !known {
            return Err(malformed(format!("unknown event {:?}", ev.event)));
        }
        if let Some(prev) = events.last() {
            if ev.t_ms < prev.t_ms {
                return Err(ReplayError::NonMonotonicTime {
                    line: line_no,
                    t_ms: ev.t_ms,
                    previous: prev.t_ms,
                });
            }
        }
        ended = ev.event == TRACE_END;
        events.push(ev);
    }
    Ok(events)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceEvent>, ReplayError> {
    let file = std::fs::File::open(path)?;
    parse_trace(std::io::BufReader::new(file))
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub settings: EngineSettings,
    pub seed: u64,
    /// Virtual time between dispatch and completion.
    pub latency_ms: Millis,
}

impl ReplayOptions {
    pub fn from_config(cfg: &Config) -> Result<Self, crate::config::ConfigError> {
        Ok(Self {
            settings: cfg.engine_settings()?,
            seed: cfg.provider.mock_seed,
            latency_ms: cfg.provider.mock_latency_ms,
        })
    }
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self::from_config(&Config::default()).expect("default config is valid")
    }
}

/// A trace event the engine refused; replay continues past it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedEvent {
    pub t_ms: Millis,
    pub event: String,
    pub code: i64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTotals {
    pub input: u64,
    pub output: u64,
}

/// Cost of the report's own token totals at one table entry's prices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCost {
    pub model: String,
    pub as_of: String,
    pub cost_micros: Money,
    pub cost: String,
}

/// Frequencies and per-request costs measured from the replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredScenario {
    /// Autocomplete baseline: one request per code change.
    pub f_auto: u64,
    /// Proactive provider requests, regenerations included.
    pub f_pro: u64,
    pub mean_context_tokens: u64,
    pub autocomplete_model: String,
    pub proactive_model: String,
    pub c_auto_micros: Money,
    pub c_pro_micros: Money,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScenario {
    pub label: String,
    pub r: f64,
    pub p: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscriptionBound {
    pub autocomplete_usd_per_month: u64,
    pub multiplier: f64,
    pub upper_bound_usd_per_month: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub seed: u64,
    pub events: usize,
    pub horizon_ms: Millis,
    pub proactive_requests: u64,
    pub manual_requests: u64,
    pub published: u64,
    pub cancelled_requests: u64,
    pub failed: u64,
    pub parse_retries: u64,
    pub chat_requests: u64,
    pub fire_times_ms: Vec<Millis>,
    pub timeline: Vec<TimelineEntry>,
    pub rejected: Vec<RejectedEvent>,
    pub tokens: TokenTotals,
    pub proactive_tokens: TokenTotals,
    pub ledger: LedgerTotals,
    pub cost_by_model: Vec<ModelCost>,
    pub measured: MeasuredScenario,
    pub reference_scenarios: Vec<ReferenceScenario>,
    /// The rounded per-request ratio quoted for the input-dominated regime.
    pub quoted_ratio: f64,
    /// The same ratio computed from the pricing table.
    pub table_ratio: Option<f64>,
    pub subscription: SubscriptionBound,
}

impl ReplayReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"));
        let _ = writeln!(s, "replay: {} events, horizon {} ms, seed {}", self.events, self.horizon_ms, self.seed);
        let _ = writeln!(
            s,
            "proactive requests: {} (published {}, cancelled {}, failed {}); manual {}, parse retries {}",
            self.proactive_requests, self.published, self.cancelled_requests, self.failed, self.manual_requests, self.parse_retries
        );
        let fires: Vec<String> = self.fire_times_ms.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "fire times (ms): {}", if fires.is_empty() { "-".to_owned() } else { fires.join(", ") });
        let _ = writeln!(s, "chat requests: {}", self.chat_requests);
        let _ = writeln!(s, "timeline:");
        for e in &self.timeline {
            let what = match &e.event {
                TimelineEvent::Fired { manual: true } => "fired (manual)".to_owned(),
                TimelineEvent::Fired { manual: false } => "fired".to_owned(),
                TimelineEvent::Retried => "regenerating after parse failure".to_owned(),
                TimelineEvent::Published { group_id, size } => format!("published {group_id} ({size} suggestions)"),
                TimelineEvent::Cancelled => "cancelled".to_owned(),
                TimelineEvent::Failed { reason } => format!("failed: {reason}"),
            };
            let _ = writeln!(s, "  {:>8} ms  {what}", e.t_ms);
        }
        for r in &self.rejected {
            let _ = writeln!(s, "rejected {} at {} ms: [{}] {}", r.event, r.t_ms, r.code, r.message);
        }
        let _ = writeln!(s, "tokens: input {}, output {}", self.tokens.input, self.tokens.output);
        let _ = writeln!(s, "ledger total: {}", self.ledger.cost_micros);
        let _ = writeln!(s, "cost of these tokens by model:");
        for c in &self.cost_by_model {
            let _ = writeln!(s, "  {:<12} {} (prices as of {})", c.model, c.cost, c.as_of);
        }
        let m = &self.measured;
        let _ = writeln!(
            s,
            "measured: f_auto {}, f_pro {}, context {} tokens, c_auto {} ({}), c_pro {} ({}), r {}, p {}, multiplier {}",
            m.f_auto,
            m.f_pro,
            m.mean_context_tokens,
            m.c_auto_micros,
            m.autocomplete_model,
            m.c_pro_micros,
            m.proactive_model,
            opt(m.r),
            opt(m.p),
            opt(m.multiplier)
        );
        let _ = writeln!(s, "reference scenarios:");
        for r in &self.reference_scenarios {
            let _ = writeln!(s, "  r {:>5}  p {:>4}  multiplier {:>6}  {}", r.r, r.p, r.multiplier, r.label);
        }
        let _ = writeln!(
            s,
            "per-request ratio: quoted {}, from table {}",
            self.quoted_ratio,
            opt(self.table_ratio)
        );
        let b = &self.subscription;
        let _ = writeln!(
            s,
            "subscription: ${}/month autocomplete x {} -> at most ${}/month with proactive suggestions",
            b.autocomplete_usd_per_month, b.multiplier, b.upper_bound_usd_per_month
        );
        s
    }
}

enum Next {
    Completion,
    Event,
    Tick(Millis),
}

/// Replays `events` against a fresh engine and the seeded mock.
pub fn replay(events: &[TraceEvent], opts: &ReplayOptions) -> ReplayReport {
    let mock = MockProvider::new(opts.seed);
    let mut engine = Engine::new(opts.settings.clone());
    // (due, request id) → outcome; request ids are unique so keys never collide
    let mut pending: BTreeMap<(Millis, u64), Result<ProviderResponse, ProviderError>> = BTreeMap::new();
    let mut rejected = Vec::new();
    let mut chat_requests = 0u64;
    let horizon = events.last().map_or(0, |e| e.t_ms);
    let mut idx = 0;

    loop {
        let completion = pending.keys().next().map(|&(t, _)| t);
        let event = events.get(idx).map(|e| e.t_ms);
        let wake = engine.next_wakeup().filter(|&w| w <= horizon);
        let next = [
            completion.map(|t| (t, 0u8)),
            event.map(|t| (t, 1)),
            wake.map(|t| (t.max(engine.last_time()), 2)),
        ]
        .into_iter()
        .flatten()
        .min();
        let Some((t, which)) = next else { break };
        let step = match which {
            0 => Next::Completion,
            1 => Next::Event,
            _ => Next::Tick(t),
        };
        match step {
            Next::Completion => {
                let key = *pending.keys().next().expect("checked non-empty");
                let outcome = pending.remove(&key).expect("key just read");
                engine
                    .provider_done(key.0, key.1, outcome)
                    .expect("virtual clock is monotonic");
            }
            Next::Event => {
                let ev = &events[idx];
                idx += 1;
                if ev.event != TRACE_END {
                    if let Err(e) = methods::apply(&mut engine, ev.t_ms, &ev.event, &ev.payload) {
                        rejected.push(RejectedEvent {
                            t_ms: ev.t_ms,
                            event: ev.event.clone(),
                            code: e.code,
                            message: e.message,
                        });
                    }
                }
            }
            Next::Tick(t) => {
                engine.tick(t).expect("virtual clock is monotonic");
            }
        }
        let now = engine.last_time();
        for effect in engine.drain_effects() {
            match effect {
                Effect::Dispatch(d) => {
                    if d.payload.purpose() == RequestPurpose::Chat {
                        chat_requests += 1;
                    }
                    pending.insert((now + opts.latency_ms, d.request_id), mock.respond(&d.payload));
                }
                Effect::Cancel { request_id } => pending.retain(|&(_, id), _| id != request_id),
                Effect::Notify(_) | Effect::Persist(_) => {}
            }
        }
    }
    build_report(&engine, opts, events.len(), horizon, rejected, chat_requests)
}

/// Reference points for the cost multiplier.
pub fn reference_scenarios(table_ratio: Option<f64>) -> Vec<ReferenceScenario> {
    let mut v = vec![
        ReferenceScenario {
            label: "worst case: every autocomplete wait also shows proactive suggestions".into(),
            r: 10.0,
            p: 1.0,
            multiplier: proactivity_multiplier(10.0, 1.0),
        },
        ReferenceScenario {
            label: "proactive requests at a tenth of the autocomplete rate".into(),
            r: 10.0,
            p: 0.1,
            multiplier: proactivity_multiplier(10.0, 0.1),
        },
    ];
    if let Some(r) = table_ratio {
        v.push(ReferenceScenario {
            label: "worst case with the exact input-price ratio".into(),
            r,
            p: 1.0,
            multiplier: proactivity_multiplier(r, 1.0),
        });
    }
    v
}

pub const QUOTED_RATIO: f64 = 10.0;

fn build_report(
    engine: &Engine,
    opts: &ReplayOptions,
    events: usize,
    horizon: Millis,
    rejected: Vec<RejectedEvent>,
    chat_requests: u64,
) -> ReplayReport {
    let stats = engine.stats();
    let s = &opts.settings;
    let ledger = engine.ledger().totals();
    let tokens = TokenTotals {
        input: ledger.input_tokens,
        output: ledger.output_tokens,
    };
    let cost_by_model = s
        .pricing
        .entries()
        .map(|e| {
            let c = request_cost(tokens.input, tokens.output, e);
            ModelCost {
                model: e.model.clone(),
                as_of: e.as_of.clone(),
                cost_micros: c,
                cost: c.to_string(),
            }
        })
        .collect();

    let f_pro = engine
        .ledger()
        .entries()
        .iter()
        .filter(|e| e.purpose == RequestPurpose::Proactive)
        .count() as u64;
    let (mean_ctx, mean_out) = if f_pro == 0 {
        (0, 0)
    } else {
        (
            stats.proactive_input_tokens.div_ceil(f_pro),
            stats.proactive_output_tokens.div_ceil(f_pro),
        )
    };
    let proactive_model = engine.session().config().model.clone();
    let auto_price = s.pricing.get(&s.autocomplete_model).ok();
    let pro_price = s.pricing.get(&proactive_model).ok();
    let (c_auto, c_pro) = match (auto_price, pro_price) {
        (Some(a), Some(p)) => {
            let sc = UsageScenario::equal_context(mean_ctx, s.autocomplete_output_tokens, mean_out, a, p, 0, 0);
            (sc.c_auto, sc.c_pro)
        }
        _ => (Money::ZERO, Money::ZERO),
    };
    let scenario = UsageScenario {
        f_auto: stats.code_changes,
        f_pro,
        c_auto,
        c_pro,
    };
    let table_ratio = match (auto_price, pro_price) {
        (Some(a), Some(p)) if a.input_price > Money::ZERO => Some(input_dominated_ratio(p, a)),
        _ => None,
    };
    let tenth = proactivity_multiplier(QUOTED_RATIO, 0.1);
    ReplayReport {
        seed: opts.seed,
        events,
        horizon_ms: horizon,
        proactive_requests: stats.fired,
        manual_requests: stats.manual_fired,
        published: stats.published,
        cancelled_requests: stats.cancelled,
        failed: stats.failed,
        parse_retries: stats.parse_retries,
        chat_requests,
        fire_times_ms: stats
            .timeline
            .iter()
            .filter(|e| matches!(e.event, TimelineEvent::Fired { .. }))
            .map(|e| e.t_ms)
            .collect(),
        timeline: stats.timeline.clone(),
        rejected,
        tokens,
        proactive_tokens: TokenTotals {
            input: stats.proactive_input_tokens,
            output: stats.proactive_output_tokens,
        },
        ledger,
        cost_by_model,
        measured: MeasuredScenario {
            f_auto: scenario.f_auto,
            f_pro: scenario.f_pro,
            mean_context_tokens: mean_ctx,
            autocomplete_model: s.autocomplete_model.clone(),
            proactive_model,
            c_auto_micros: c_auto,
            c_pro_micros: c_pro,
            r: scenario.cost_ratio(),
            p: scenario.frequency_ratio(),
            multiplier: scenario.multiplier(),
        },
        reference_scenarios: reference_scenarios(table_ratio),
        quoted_ratio: QUOTED_RATIO,
        table_ratio,
        subscription: SubscriptionBound {
            autocomplete_usd_per_month: AUTOCOMPLETE_SUBSCRIPTION_USD,
            multiplier: tenth,
            upper_bound_usd_per_month: (AUTOCOMPLETE_SUBSCRIPTION_USD as f64 * tenth).round() as u64,
        },
    }
}

/// Loads a trace file and replays it.
pub fn replay_file(path: &Path, opts: &ReplayOptions) -> Result<ReplayReport, ReplayError> {
    Ok(replay(&load_trace(path)?, opts))
}
