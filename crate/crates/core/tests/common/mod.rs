//! Test-side oracles shared by the property suites and the acceptance target.
//!
//! Nothing here calls into the crate's own decision logic when computing an
//! expected value; the reference scheduler is an independent transcription of
//! the transition rules.

#![allow(dead_code)]

use std::collections::BTreeSet;

use genied::parser::{serialize_group, Suggestion, SuggestionGroup, SuggestionState};
use genied::prompt::{EnabledTypes, SuggestionType};
use genied::scheduler::{Action, EventKind, SchedulerConfig, SchedulerEvent, SchedulerState};
use genied::session::{render_accepted, Origin, Role, SessionConfig, SessionState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// scheduler

/// Literal reading of the transition rules, kept deliberately naive.
#[derive(Debug, Clone, Default)]
pub struct RefScheduler {
    pub arm: Option<u64>,
    pub suppress: u64,
    pub in_flight: bool,
}

impl RefScheduler {
    pub fn on(&mut self, kind: EventKind, at: u64, code_quiet: u64, chat_quiet: u64) -> Action {
        use EventKind::*;
        match kind {
            CodeChange => {
                self.arm = Some(at + code_quiet);
                if self.in_flight {
                    self.in_flight = false;
                    return Action::CancelInFlight;
                }
                Action::None
            }
            ChatTyping | ChatMessageSent | SuggestionInteraction | SuggestionAccepted => {
                self.suppress = self.suppress.max(at + chat_quiet);
                self.arm = None;
                Action::None
            }
            ManualTrigger => {
                if self.in_flight {
                    return Action::None;
                }
                self.in_flight = true;
                self.arm = None;
                Action::FireRequest
            }
            RequestCompleted | RequestFailed => {
                self.in_flight = false;
                Action::None
            }
        }
    }

    pub fn tick(&mut self, now: u64) -> Action {
        match self.arm {
            Some(a) if now >= a && now >= self.suppress && !self.in_flight => {
                self.arm = None;
                self.in_flight = true;
                Action::FireRequest
            }
            _ => Action::None,
        }
    }
}

pub const USER_KINDS: [EventKind; 6] = [
    EventKind::CodeChange,
    EventKind::ChatTyping,
    EventKind::ChatMessageSent,
    EventKind::SuggestionInteraction,
    EventKind::SuggestionAccepted,
    EventKind::ManualTrigger,
];

pub fn is_chat(kind: EventKind) -> bool {
    matches!(
        kind,
        EventKind::ChatTyping | EventKind::ChatMessageSent | EventKind::SuggestionInteraction | EventKind::SuggestionAccepted
    )
}

/// A user event stream plus the provider latency for each fire.
#[derive(Debug, Clone)]
pub struct Stream {
    pub events: Vec<(u64, EventKind)>,
    pub latencies: Vec<(u64, bool)>,
}

pub fn random_stream(seed: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..80);
    let mut t = 0u64;
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let gap = match rng.random_range(0..10) {
            0..=5 => rng.random_range(0..2_500),
            6..=8 => rng.random_range(0..12_000),
            _ => rng.random_range(0..45_000),
        };
        t += gap;
        let kind = match rng.random_range(0..100) {
            0..=54 => EventKind::CodeChange,
            55..=66 => EventKind::ChatTyping,
            67..=72 => EventKind::ChatMessageSent,
            73..=80 => EventKind::SuggestionInteraction,
            81..=88 => EventKind::SuggestionAccepted,
            _ => EventKind::ManualTrigger,
        };
        events.push((t, kind));
    }
    let latencies = (0..n + 2).map(|_| (rng.random_range(0..4_000), rng.random_bool(0.8))).collect();
    Stream { events, latencies }
}

#[derive(Debug, Default, Clone)]
pub struct StreamOutcome {
    pub fires: Vec<(u64, bool)>,
    pub max_in_flight: u32,
}

/// Hosts the real scheduler the way the daemon does: ticks at `next_wakeup`,
/// completes fired requests after the scripted latency, and ticks before an
/// event only when strictly earlier. Every action is checked against
/// [`RefScheduler`] and every automatic fire against the quiet windows.
pub fn run_stream(cfg: &SchedulerConfig, stream: &Stream) -> Result<StreamOutcome, String> {
    let (cq, hq) = (cfg.t_code_quiet, cfg.t_chat_quiet);
    let mut s = SchedulerState::new();
    let mut r = RefScheduler::default();
    let mut out = StreamOutcome::default();
    let mut in_flight = 0u32;
    let mut pending: Option<(u64, bool)> = None;
    let mut lat = stream.latencies.iter().cycle();
    let mut history: Vec<(u64, EventKind)> = Vec::new();
    let mut idx = 0;

    let mut on_fire = |t: u64, manual: bool, in_flight: &mut u32, pending: &mut Option<(u64, bool)>, out: &mut StreamOutcome| {
        *in_flight += 1;
        out.max_in_flight = out.max_in_flight.max(*in_flight);
        out.fires.push((t, manual));
        let &(l, ok) = lat.next().expect("cycle");
        *pending = Some((t + l, ok));
    };

    loop {
        let ev_t = stream.events.get(idx).map(|e| e.0);
        let done_t = pending.map(|p| p.0);
        let wake = s.next_wakeup();
        if s.next_wakeup() != ref_wakeup(&r) {
            return Err(format!("wakeup mismatch: impl {:?} ref {:?}", s.next_wakeup(), ref_wakeup(&r)));
        }
        // completion first, then user event, then tick, at equal times
        let cands = [done_t.map(|t| (t, 0)), ev_t.map(|t| (t, 1)), wake.map(|t| (t.max(s.last_seen()), 2))];
        let Some((t, which)) = cands.into_iter().flatten().min() else { break };
        match which {
            0 => {
                let (_, ok) = pending.take().expect("pending");
                let kind = if ok { EventKind::RequestCompleted } else { EventKind::RequestFailed };
                let a = s.on_event(cfg, SchedulerEvent::new(kind, t)).map_err(|e| e.to_string())?;
                let b = r.on(kind, t, cq, hq);
                if a != b {
                    return Err(format!("{kind:?}@{t}: impl {a:?} ref {b:?}"));
                }
                in_flight -= 1;
            }
            1 => {
                let (_, kind) = stream.events[idx];
                idx += 1;
                let a = s.on_event(cfg, SchedulerEvent::new(kind, t)).map_err(|e| e.to_string())?;
                let b = r.on(kind, t, cq, hq);
                if a != b {
                    return Err(format!("{kind:?}@{t}: impl {a:?} ref {b:?}"));
                }
                history.push((t, kind));
                match a {
                    Action::FireRequest => {
                        if in_flight != 0 {
                            return Err(format!("manual fire at {t} while a request is in flight"));
                        }
                        on_fire(t, true, &mut in_flight, &mut pending, &mut out);
                    }
                    Action::CancelInFlight => {
                        if in_flight != 1 {
                            return Err(format!("cancel at {t} with {in_flight} in flight"));
                        }
                        in_flight = 0;
                        pending = None;
                    }
                    Action::None => {}
                }
            }
            _ => {
                let a = s.tick(t);
                let b = r.tick(t);
                if a != b {
                    return Err(format!("tick@{t}: impl {a:?} ref {b:?}"));
                }
                if a != Action::FireRequest {
                    return Err(format!("tick at advertised wakeup {t} did not fire"));
                }
                if in_flight != 0 {
                    return Err(format!("automatic fire at {t} while a request is in flight"));
                }
                for &(et, k) in history.iter().rev() {
                    if k == EventKind::CodeChange && et + cq > t {
                        return Err(format!("fire at {t} within {cq} ms of a code change at {et}"));
                    }
                    if is_chat(k) && et + hq > t {
                        return Err(format!("fire at {t} within {hq} ms of {k:?} at {et}"));
                    }
                }
                on_fire(t, false, &mut in_flight, &mut pending, &mut out);
            }
        }
        if in_flight > 1 {
            return Err(format!("{in_flight} requests in flight at {t}"));
        }
    }
    Ok(out)
}

fn ref_wakeup(r: &RefScheduler) -> Option<u64> {
    if r.in_flight {
        return None;
    }
    r.arm.map(|a| a.max(r.suppress))
}

/// Appends a lone code change well after everything settles and checks that it
/// produces exactly one fire, at `change + t_code_quiet`.
pub fn check_liveness(cfg: &SchedulerConfig, stream: &Stream) -> Result<(), String> {
    let last = stream.events.last().map_or(0, |e| e.0);
    let change = last + cfg.t_chat_quiet + 10_000;
    let mut extended = stream.clone();
    extended.events.push((change, EventKind::CodeChange));
    let out = run_stream(cfg, &extended)?;
    let after: Vec<_> = out.fires.iter().filter(|f| f.0 >= change).collect();
    match after.as_slice() {
        [(t, false)] if *t == change + cfg.t_code_quiet => Ok(()),
        other => Err(format!("change at {change} then quiet gave fires {other:?}")),
    }
}

// ---------------------------------------------------------------------------
// parser

const TEXT_ALPHABET: &[&str] = &[
    "a", "Z", "0", " ", "\n", "\t", "\"", "\\", "`", "```", "{", "}", "[", "]", ",", ":", "é", "日本", "🦀", "<|cursor|>", "\u{0}",
    "null", "\r\n",
];

pub fn random_text(rng: &mut ChaCha8Rng, max_pieces: usize, nonblank: bool) -> String {
    let n = rng.random_range(0..=max_pieces);
    let mut s: String = (0..n).map(|_| TEXT_ALPHABET[rng.random_range(0..TEXT_ALPHABET.len())]).collect();
    if nonblank && s.trim().is_empty() {
        s.push('x');
    }
    s
}

pub fn random_enabled(rng: &mut ChaCha8Rng) -> EnabledTypes {
    loop {
        let picked: Vec<SuggestionType> = SuggestionType::ALL.into_iter().filter(|_| rng.random_bool(0.5)).collect();
        if let Ok(e) = EnabledTypes::new(picked) {
            return e;
        }
    }
}

/// A well-formed group using only `enabled` tags, as the parser would produce it.
pub fn random_group(rng: &mut ChaCha8Rng, enabled: &EnabledTypes, id: &str, created_at: u64) -> SuggestionGroup {
    let tags: Vec<SuggestionType> = enabled.iter().collect();
    let n = rng.random_range(1..=3);
    SuggestionGroup {
        id: id.to_owned(),
        suggestions: (0..n)
            .map(|i| Suggestion {
                id: format!("{id}-s{}", i + 1),
                tag: tags[rng.random_range(0..tags.len())],
                description: random_text(rng, 12, true),
                code: random_text(rng, 20, false),
                explanation: random_text(rng, 12, false),
                state: SuggestionState::Temporary,
            })
            .collect(),
        created_at,
        retained: false,
    }
}

pub fn fenced(group: &SuggestionGroup, info: &str) -> String {
    format!("```{info}\n{}\n```", serialize_group(group))
}

/// Byte-level corruption of a valid payload: flips, deletions, insertions and splices.
pub fn mutate(rng: &mut ChaCha8Rng, valid: &[u8]) -> Vec<u8> {
    let mut b = valid.to_vec();
    for _ in 0..rng.random_range(1..=8) {
        match rng.random_range(0..5) {
            0 if !b.is_empty() => {
                let i = rng.random_range(0..b.len());
                b[i] ^= 1 << rng.random_range(0..8);
            }
            1 if !b.is_empty() => {
                let i = rng.random_range(0..b.len());
                let j = (i + rng.random_range(1..16)).min(b.len());
                b.drain(i..j);
            }
            2 => {
                let i = rng.random_range(0..=b.len());
                let piece = [b"\"".as_slice(), b"{", b"}", b"[", b"]", b",", b":", b"\\", b"```", b"null", b"\xff"];
                let p = piece[rng.random_range(0..piece.len())];
                b.splice(i..i, p.iter().copied());
            }
            3 => b.truncate(rng.random_range(0..=b.len())),
            _ => {
                let i = rng.random_range(0..=b.len());
                let j = rng.random_range(0..=b.len());
                let (lo, hi) = (i.min(j), i.max(j));
                let copy = valid[lo.min(valid.len())..hi.min(valid.len())].to_vec();
                b.splice(lo..lo, copy);
            }
        }
    }
    b
}

pub fn random_bytes(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = rng.random_range(0..256);
    (0..n).map(|_| rng.random()).collect()
}

// ---------------------------------------------------------------------------
// traces

/// A plausible editing session: one document, typing bursts, chat, triggers,
/// accepts against guessed ids (some are rejected on purpose), and a final end marker.
pub fn random_trace(seed: u64) -> Vec<genied::replay::TraceEvent> {
    use genied::replay::{TraceEvent, TRACE_END};
    use serde_json::json;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uri = "file:///t/main.py";
    let mut len = 0usize;
    let mut t = 0u64;
    let mut out = vec![TraceEvent { t_ms: 0, event: "document/didOpen".into(), payload: json!({"uri": uri, "text": ""}) }];
    for _ in 0..rng.random_range(1..60) {
        t += match rng.random_range(0..4) {
            0 => rng.random_range(0..500),
            1 => rng.random_range(500..6_000),
            2 => rng.random_range(6_000..20_000),
            _ => rng.random_range(20_000..50_000),
        };
        let (event, payload) = match rng.random_range(0..100) {
            0..=59 => {
                let at = rng.random_range(0..=len);
                let text = random_text(&mut rng, 6, true);
                len += text.chars().count();
                ("document/didChange", json!({"uri": uri, "changes": [{"range": {"start": at, "end": at}, "text": text}]}))
            }
            60..=64 => ("cursor/didMove", json!({"uri": uri, "offset": rng.random_range(0..=len)})),
            65..=71 => ("chat/typing", json!({})),
            72..=76 => ("chat/sendMessage", json!({"text": random_text(&mut rng, 5, true)})),
            77..=84 => {
                let id = format!("g{}-s{}", rng.random_range(1..6), rng.random_range(1..4));
                ("suggestions/accept", json!({"suggestionId": id}))
            }
            85..=88 => ("suggestions/dismiss", json!({})),
            89..=95 => ("suggestions/trigger", json!({})),
            _ => ("config/update", json!({"enabledTypes": ["Testing", "Debugging"]})),
        };
        out.push(TraceEvent { t_ms: t, event: event.into(), payload });
    }
    out.push(TraceEvent { t_ms: t + rng.random_range(0..40_000), event: TRACE_END.into(), payload: json!({}) });
    out
}

// ---------------------------------------------------------------------------
// session

#[derive(Debug, Clone, Copy)]
pub enum SessionOp {
    Append,
    Publish(usize),
    Accept(usize),
    Dismiss,
}

pub fn random_ops(rng: &mut ChaCha8Rng) -> Vec<SessionOp> {
    let n = rng.random_range(1..60);
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0..=1 => SessionOp::Append,
            2..=4 => SessionOp::Publish(rng.random_range(1..=3)),
            5..=8 => SessionOp::Accept(rng.random_range(0..64)),
            _ => SessionOp::Dismiss,
        })
        .collect()
}

fn group_of(id: &str, n: usize, at: u64) -> SuggestionGroup {
    SuggestionGroup {
        id: id.to_owned(),
        suggestions: (0..n)
            .map(|i| Suggestion {
                id: format!("{id}-s{}", i + 1),
                tag: SuggestionType::ALL[i % 6],
                description: format!("{id} item {i}"),
                code: if i % 2 == 0 { format!("code_{i}()") } else { String::new() },
                explanation: if i == 1 { "because".into() } else { String::new() },
                state: SuggestionState::Temporary,
            })
            .collect(),
        created_at: at,
        retained: false,
    }
}

/// Applies `ops` and checks the lifecycle invariants after every step:
/// append-only history, accepted suggestions matching assistant messages one
/// to one, retained groups keeping their anchors, and a single current group.
pub fn check_session(ops: &[SessionOp]) -> Result<(), String> {
    let mut s = SessionState::new(SessionConfig::new("gpt-4o"));
    let mut accepted: Vec<(String, usize, String)> = Vec::new();
    let mut anchors: Vec<(String, usize)> = Vec::new();
    let mut published = 0;
    for (step, op) in ops.iter().enumerate() {
        let t = step as u64 * 100;
        let before = s.messages().to_vec();
        match *op {
            SessionOp::Append => {
                s.append_message(Role::User, format!("msg {step}"), t);
            }
            SessionOp::Publish(n) => {
                published += 1;
                let prev = s.current_group().cloned();
                let out = s.publish_group(group_of(&format!("g{published}"), n, t));
                if let Some(p) = prev {
                    let expect_retained = p.group.retained;
                    if expect_retained != out.retained.is_some() || expect_retained == out.cleared.is_some() {
                        return Err(format!("step {step}: publish outcome {out:?} for previous {:?}", p.group.id));
                    }
                }
            }
            SessionOp::Accept(k) => {
                let candidates: Vec<(String, String, SuggestionState)> = s
                    .current_group()
                    .into_iter()
                    .chain(s.retained_groups())
                    .flat_map(|g| {
                        g.group
                            .suggestions
                            .iter()
                            .map(|x| (x.id.clone(), render_accepted(&x.description, &x.code, &x.explanation), x.state))
                    })
                    .collect();
                if candidates.is_empty() {
                    if s.accept_suggestion("g0-s1", t).is_ok() {
                        return Err(format!("step {step}: accepted a nonexistent suggestion"));
                    }
                    continue;
                }
                let (id, body, state) = &candidates[k % candidates.len()];
                let already = *state != SuggestionState::Temporary;
                match s.accept_suggestion(id, t) {
                    Ok(idx) if !already => {
                        if idx != before.len() || s.messages()[idx].body != *body {
                            return Err(format!("step {step}: accept of {id} produced message {idx}"));
                        }
                        accepted.push((id.clone(), idx, body.clone()));
                    }
                    Ok(_) => return Err(format!("step {step}: resolved suggestion {id} accepted again")),
                    Err(_) if already => {}
                    Err(e) => return Err(format!("step {step}: accept {id} failed: {e}")),
                }
            }
            SessionOp::Dismiss => {
                let had = s.current_group().is_some();
                if s.dismiss_group().is_ok() != had {
                    return Err(format!("step {step}: dismiss result disagrees with current group"));
                }
            }
        }
        // append-only
        if s.messages().len() < before.len() || s.messages()[..before.len()] != before[..] {
            return Err(format!("step {step}: history was rewritten"));
        }
        // one-to-one accepted ↔ assistant message
        let assistant: Vec<usize> = s
            .messages()
            .iter()
            .enumerate()
            .filter(|(_, m)| m.role == Role::Assistant && m.origin == Origin::AcceptedSuggestion)
            .map(|(i, _)| i)
            .collect();
        let idxs: Vec<usize> = accepted.iter().map(|a| a.1).collect();
        if assistant != idxs {
            return Err(format!("step {step}: assistant messages {assistant:?} vs accepts {idxs:?}"));
        }
        let accepted_states: BTreeSet<String> = s
            .current_group()
            .into_iter()
            .chain(s.retained_groups())
            .flat_map(|g| g.group.suggestions.iter())
            .filter(|x| x.state == SuggestionState::Accepted)
            .map(|x| x.id.clone())
            .collect();
        let accepted_ids: BTreeSet<String> = accepted.iter().map(|a| a.0.clone()).collect();
        if accepted_states != accepted_ids {
            return Err(format!("step {step}: accepted states {accepted_states:?} vs {accepted_ids:?}"));
        }
        // keep-on-refresh anchoring
        for g in s.retained_groups() {
            if !g.group.retained || !g.group.suggestions.iter().any(|x| x.state == SuggestionState::Accepted) {
                return Err(format!("step {step}: {} kept without an accepted item", g.group.id));
            }
            match anchors.iter().find(|a| a.0 == g.group.id) {
                Some(a) if a.1 != g.anchor => return Err(format!("step {step}: {} moved anchor", g.group.id)),
                Some(_) => {}
                None => anchors.push((g.group.id.clone(), g.anchor)),
            }
        }
        for (id, _) in &anchors {
            if !s.retained_groups().iter().any(|g| &g.group.id == id) {
                return Err(format!("step {step}: retained group {id} vanished"));
            }
        }
        // single current group, distinct from the retained ones
        if let Some(c) = s.current_group() {
            if s.retained_groups().iter().any(|g| g.group.id == c.group.id) {
                return Err(format!("step {step}: {} is both current and retained", c.group.id));
            }
        }
        let ids: BTreeSet<&str> = s.retained_groups().iter().map(|g| g.group.id.as_str()).collect();
        if ids.len() != s.retained_groups().len() {
            return Err(format!("step {step}: duplicate retained group"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rpc

pub mod rpc {
    use genied::rpc::framing::{read_frame, write_frame, Frame};
    use genied::rpc::{serve_stdio, DaemonOptions, SessionSummary};
    use serde_json::{json, Value};
    use tokio::io::{BufReader, DuplexStream, ReadHalf, WriteHalf};
    use tokio::task::JoinHandle;

    /// Test client wired to an in-process daemon through a framed duplex pipe.
    pub struct Client {
        pub r: BufReader<ReadHalf<DuplexStream>>,
        pub w: WriteHalf<DuplexStream>,
        pub daemon: JoinHandle<SessionSummary>,
    }

    impl Client {
        pub fn start(opts: DaemonOptions) -> Self {
            let (client, server) = tokio::io::duplex(1 << 20);
            let (sr, sw) = tokio::io::split(server);
            let daemon = tokio::spawn(async move { serve_stdio(opts, sr, sw).await.expect("session starts") });
            let (r, w) = tokio::io::split(client);
            Self { r: BufReader::new(r), w, daemon }
        }

        pub async fn send_raw(&mut self, text: &str) {
            write_frame(&mut self.w, text).await.expect("pipe open");
        }

        pub async fn send(&mut self, v: Value) {
            self.send_raw(&v.to_string()).await;
        }

        pub async fn notify(&mut self, method: &str, params: Value) {
            self.send(json!({"jsonrpc": "2.0", "method": method, "params": params})).await;
        }

        pub async fn recv(&mut self) -> Value {
            match read_frame(&mut self.r).await.expect("frame") {
                Some(Frame::Message(m)) => serde_json::from_str(&m).expect("daemon sends JSON"),
                other => panic!("expected a message, got {other:?}"),
            }
        }

        /// Sends a request and returns every notification that preceded the response, then the response.
        pub async fn call(&mut self, id: Value, method: &str, params: Value) -> (Vec<Value>, Value) {
            self.send(json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params})).await;
            let mut before = Vec::new();
            loop {
                let v = self.recv().await;
                if v.get("id").is_some() {
                    assert_eq!(v["id"], id, "response id must echo the request id");
                    return (before, v);
                }
                before.push(v);
            }
        }

        pub async fn initialize(&mut self) -> Value {
            let (n, r) = self.call(json!(0), "initialize", json!({"protocolVersion": 1})).await;
            assert!(n.is_empty());
            r["result"].clone()
        }

        /// Reads notifications until one named `method` arrives; returns it and the ones skipped.
        pub async fn until(&mut self, method: &str) -> (Value, Vec<Value>) {
            let mut skipped = Vec::new();
            loop {
                let v = self.recv().await;
                if v["method"] == method {
                    return (v, skipped);
                }
                skipped.push(v);
            }
        }

        pub async fn shutdown(mut self) -> SessionSummary {
            let (_, r) = self.call(json!("bye"), "shutdown", json!(null)).await;
            assert_eq!(r["result"], Value::Null);
            self.daemon.await.expect("daemon task")
        }
    }

    pub fn error_code(v: &Value) -> i64 {
        v["error"]["code"].as_i64().unwrap_or_else(|| panic!("not an error response: {v}"))
    }
}
