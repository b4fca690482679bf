//! Wire conformance over the framed stdio transport, on virtual time.

mod common;

use std::sync::Arc;

use common::rpc::{error_code, Client};
use genied::provider::{MockProvider, MockReply, ProviderError};
use genied::replay::{load_trace, replay, ReplayOptions};
use genied::rpc::DaemonOptions;
use genied::EngineSettings;
use serde_json::{json, Value};
use tokio::io::AsyncWriteExt;
use tokio::time::Instant;

const URI: &str = "file:///w/stats.py";
const TEXT: &str = "def mean(xs):\n    return sum(xs) / len(xs)\n";

fn opts() -> DaemonOptions {
    DaemonOptions::new(EngineSettings::default(), Arc::new(MockProvider::new(5).with_latency(800)))
}

async fn open(c: &mut Client) {
    c.notify("document/didOpen", json!({"uri": URI, "text": TEXT})).await;
}

fn change(at: usize, text: &str) -> Value {
    json!({"uri": URI, "changes": [{"range": {"start": at, "end": at}, "text": text}]})
}

#[tokio::test(start_paused = true)]
async fn requests_before_initialize_are_refused() {
    let mut c = Client::start(opts());
    let (_, r) = c.call(json!(1), "session/getState", json!({})).await;
    assert_eq!(error_code(&r), -32002);
    // notifications are dropped silently
    open(&mut c).await;
    let init = c.initialize().await;
    assert_eq!(init["protocolVersion"], 1);
    assert_eq!(init["sessionId"], "stdio-1");
    assert_eq!(init["state"]["messages"], json!([]));
    assert_eq!(init["capabilities"]["suggestionTypes"].as_array().unwrap().len(), 6);
    assert_eq!(init["capabilities"]["replayInjection"], false);
    let (_, r) = c.call(json!(2), "cursor/didMove", json!({"uri": URI, "offset": 0})).await;
    assert_eq!(error_code(&r), -32011, "the pre-initialize didOpen must not have been applied");
    c.shutdown().await;
}

#[tokio::test(start_paused = true)]
async fn initialize_is_checked_and_only_once() {
    let mut c = Client::start(opts());
    let (_, r) = c.call(json!(1), "initialize", json!({"protocolVersion": 2})).await;
    assert_eq!(error_code(&r), -32602);
    let (_, r) = c.call(json!(2), "initialize", json!({})).await;
    assert_eq!(error_code(&r), -32602);
    c.initialize().await;
    let (_, r) = c.call(json!(3), "initialize", json!({"protocolVersion": 1})).await;
    assert_eq!(error_code(&r), -32600);
    c.shutdown().await;
}

#[tokio::test(start_paused = true)]
async fn ids_are_echoed_verbatim() {
    let mut c = Client::start(opts());
    c.initialize().await;
    for id in [json!(7), json!("abc"), json!(-3), json!("")] {
        let (_, r) = c.call(id.clone(), "session/getState", json!({})).await;
        assert_eq!(r["jsonrpc"], "2.0");
        assert!(r.get("result").is_some());
    }
    c.shutdown().await;
}

#[tokio::test(start_paused = true)]
async fn envelope_errors_use_standard_codes() {
    let mut c = Client::start(opts());
    c.initialize().await;
    c.send_raw("{not json").await;
    let r = c.recv().await;
    assert_eq!(error_code(&r), -32700);
    assert_eq!(r["id"], Value::Null);
    c.send_raw(r#"[{"jsonrpc":"2.0","id":1,"method":"session/getState"}]"#).await;
    assert_eq!(error_code(&c.recv().await), -32600);
    c.send_raw(r#"{"jsonrpc":"1.0","id":4,"method":"session/getState"}"#).await;
    let r = c.recv().await;
    assert_eq!((error_code(&r), r["id"].clone()), (-32600, json!(4)));
    let (_, r) = c.call(json!(5), "no/such", json!({})).await;
    assert_eq!(error_code(&r), -32601);
    let (_, r) = c.call(json!(6), "document/didOpen", json!({"uri": 3})).await;
    assert_eq!(error_code(&r), -32602);
    c.send_raw(r#"{"jsonrpc":"2.0","id":7,"method":"session/getState","params":[1]}"#).await;
    assert_eq!(error_code(&c.recv().await), -32602);
    // a stray response object from the client is ignored
    c.send_raw(r#"{"jsonrpc":"2.0","id":99,"result":null}"#).await;
    let (_, r) = c.call(json!(8), "session/getState", json!({})).await;
    assert!(r.get("result").is_some());
    c.shutdown().await;
}

#[tokio::test(start_paused = true)]
async fn engine_errors_map_to_application_codes() {
    let mut c = Client::start(opts());
    c.initialize().await;
    let (_, r) = c.call(json!(1), "document/didChange", change(0, "x")).await;
    assert_eq!(error_code(&r), -32011);
    open(&mut c).await;
    let (_, r) = c.call(json!(2), "document/didChange", change(999, "x")).await;
    assert_eq!(error_code(&r), -32010);
    let (_, r) = c.call(json!(3), "suggestions/accept", json!({"suggestionId": "g9-s1"})).await;
    assert_eq!(error_code(&r), -32012);
    let (_, r) = c.call(json!(4), "suggestions/dismiss", json!({})).await;
    assert_eq!(error_code(&r), -32014);
    let (_, r) = c.call(json!(5), "config/update", json!({"enabledTypes": []})).await;
    assert_eq!(error_code(&r), -32015);
    let (_, r) = c.call(json!(6), "config/update", json!({"enabledTypes": ["Poetry"]})).await;
    assert_eq!(error_code(&r), -32016);
    let (_, r) = c.call(json!(7), "config/update", json!({"task": "x".repeat(8_001)})).await;
    assert_eq!(error_code(&r), -32017);
    c.shutdown().await;
}

#[tokio::test(start_paused = true)]
async fn notifications_get_no_response() {
    let mut c = Client::start(opts());
    c.initialize().await;
    open(&mut c).await;
    c.notify("cursor/didMove", json!({"uri": URI, "offset": 4})).await;
    c.notify("cursor/didMove", json!({"uri": URI, "offset": 4000})).await;
    c.notify("chat/typing", json!({})).await;
    let (before, r) = c.call(json!("probe"), "session/getState", json!({})).await;
    assert!(before.is_empty(), "{before:?}");
    assert_eq!(r["result"]["messages"], json!([]));
    c.shutdown().await;
}

#[tokio::test(start_paused = true)]
async fn quiet_period_then_publish_then_accept() {
    let mut c = Client::start(opts());
    c.initialize().await;
    open(&mut c).await;
    let t0 = Instant::now();
    let (n, r) = c.call(json!(1), "document/didChange", change(43, "#")).await;
    assert!(n.is_empty());
    assert_eq!(r["result"]["version"], 1);
    let (published, skipped) = c.until("suggestions/published").await;
    let waited = t0.elapsed().as_millis();
    assert!((5_800..5_900).contains(&waited), "published after {waited} ms");
    assert_eq!(skipped.iter().map(|v| v["method"].clone()).collect::<Vec<_>>(), vec![json!("cost/updated")]);
    let group = &published["params"]["group"];
    assert_eq!(published["params"]["anchor"], 0);
    let suggestions = group["suggestions"].as_array().unwrap();
    assert_eq!(suggestions.len(), 3);
    assert!(suggestions.iter().all(|s| s["state"] == "temporary"));

    let sid = suggestions[1]["id"].as_str().unwrap().to_owned();
    let (n, r) = c.call(json!(2), "suggestions/accept", json!({"suggestionId": sid})).await;
    assert_eq!(n.len(), 1);
    assert_eq!(n[0]["method"], "chat/messageAppended");
    assert_eq!(n[0]["params"]["index"], 0);
    assert_eq!(n[0]["params"]["message"]["role"], "assistant");
    assert_eq!(r["result"]["index"], 0);
    let (_, r) = c.call(json!(3), "suggestions/accept", json!({"suggestionId": sid})).await;
    assert_eq!(error_code(&r), -32013);

    let summary = c.shutdown().await;
    assert!(summary.clean_shutdown);
    assert_eq!((summary.stats.fired, summary.stats.published), (1, 1));
}

#[tokio::test(start_paused = true)]
async fn typing_cancels_the_in_flight_request() {
    let mut c = Client::start(opts());
    c.initialize().await;
    open(&mut c).await;
    c.notify("document/didChange", change(43, "a")).await;
    tokio::time::sleep(std::time::Duration::from_millis(5_400)).await;
    let (n, _) = c.call(json!(1), "document/didChange", change(44, "b")).await;
    assert!(n.is_empty(), "the cancelled request must not publish: {n:?}");
    let t1 = Instant::now();
    c.until("suggestions/published").await;
    assert!((5_800..5_900).contains(&t1.elapsed().as_millis()));
    let s = c.shutdown().await;
    assert_eq!((s.stats.fired, s.stats.cancelled, s.stats.published), (2, 1, 1));
}

#[tokio::test(start_paused = true)]
async fn manual_trigger_and_chat_flow() {
    let mut c = Client::start(opts());
    c.initialize().await;
    open(&mut c).await;
    let (_, r) = c.call(json!(1), "chat/sendMessage", json!({"text": "what does mean do?"})).await;
    assert_eq!(r["result"]["index"], 0);
    let (_, r) = c.call(json!(2), "suggestions/trigger", json!({})).await;
    assert_eq!(r["result"]["fired"], true);
    let (_, r) = c.call(json!(3), "suggestions/trigger", json!({})).await;
    assert_eq!(r["result"]["fired"], false, "only one proactive request may be in flight");
    let (p, _) = c.until("suggestions/published").await;
    let first = p["params"]["group"]["id"].as_str().unwrap().to_owned();
    let (n, r) = c.call(json!(4), "suggestions/dismiss", json!({})).await;
    assert_eq!(r["result"]["groupId"], first.as_str());
    assert!(n.iter().any(|v| v["method"] == "suggestions/cleared"));
    let (_, st) = c.call(json!(5), "session/getState", json!({})).await;
    assert_eq!(st["result"]["currentGroup"], Value::Null);
    assert!(!st["result"]["messages"].as_array().unwrap().is_empty());
    c.shutdown().await;
}

#[tokio::test(start_paused = true)]
async fn provider_failure_leaves_state_intact() {
    let mock = MockProvider::new(1).with_script([MockReply::Fail(ProviderError::HttpError(500))]);
    let mut c = Client::start(DaemonOptions::new(EngineSettings::default(), Arc::new(mock)));
    c.initialize().await;
    open(&mut c).await;
    c.call(json!(1), "suggestions/trigger", json!({})).await;
    tokio::time::sleep(std::time::Duration::from_millis(2_000)).await;
    let (n, st) = c.call(json!(2), "session/getState", json!({})).await;
    assert!(n.iter().all(|v| v["method"] != "suggestions/published"));
    assert_eq!(st["result"]["currentGroup"], Value::Null);
    let s = c.shutdown().await;
    assert_eq!(s.stats.failed, 1);
}

#[tokio::test(start_paused = true)]
async fn eof_without_shutdown_is_not_clean() {
    let mut c = Client::start(opts());
    c.initialize().await;
    // dropping a split half leaves the pipe open; shut down the write side instead
    c.w.shutdown().await.unwrap();
    let s = c.daemon.await.unwrap();
    assert!(!s.clean_shutdown);
}

#[tokio::test(start_paused = true)]
async fn session_log_restores_history() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("session.jsonl");
    let with_log = || DaemonOptions { session_log: Some(log.clone()), ..opts() };

    let mut c = Client::start(with_log());
    c.initialize().await;
    open(&mut c).await;
    c.call(json!(1), "suggestions/trigger", json!({})).await;
    let (p, _) = c.until("suggestions/published").await;
    let sid = p["params"]["group"]["suggestions"][0]["id"].as_str().unwrap().to_owned();
    c.call(json!(2), "suggestions/accept", json!({"suggestionId": sid})).await;
    c.call(json!(3), "chat/sendMessage", json!({"text": "thanks"})).await;
    c.shutdown().await;

    let mut c = Client::start(with_log());
    let init = c.initialize().await;
    let msgs = init["state"]["messages"].as_array().unwrap();
    assert!(msgs.len() >= 2);
    assert_eq!(msgs[0]["origin"], "accepted-suggestion");
    assert_eq!(msgs[1]["body"], "thanks");
    // new groups must not reuse restored ids
    open(&mut c).await;
    c.call(json!(1), "suggestions/trigger", json!({})).await;
    let (p2, _) = c.until("suggestions/published").await;
    assert_ne!(p2["params"]["group"]["id"], p["params"]["group"]["id"]);
    c.shutdown().await;
}

#[tokio::test(start_paused = true)]
async fn recorded_trace_replays_to_the_same_fires() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let mut c = Client::start(DaemonOptions { record: Some(trace.clone()), ..opts() });
    c.initialize().await;
    open(&mut c).await;
    for i in 0..4 {
        c.notify("document/didChange", change(43 + i, "x")).await;
        tokio::time::sleep(std::time::Duration::from_millis(1_000)).await;
    }
    c.until("suggestions/published").await;
    tokio::time::sleep(std::time::Duration::from_millis(1_000)).await;
    let live = c.shutdown().await;

    let events = load_trace(&trace).unwrap();
    assert_eq!(events.last().unwrap().event, "trace/end");
    let r = replay(&events, &ReplayOptions { seed: 5, ..ReplayOptions::default() });
    assert_eq!(r.proactive_requests, live.stats.fired);
    assert_eq!(r.published, live.stats.published);
    assert!(r.rejected.is_empty());
}

#[tokio::test(start_paused = true)]
async fn injection_is_gated_and_moves_the_clock() {
    let mut c = Client::start(opts());
    c.initialize().await;
    let ev = json!({"t_ms": 0, "event": "chat/typing", "payload": {}});
    let (_, r) = c.call(json!(1), "replay/injectEvent", ev.clone()).await;
    assert_eq!(error_code(&r), -32601);
    c.shutdown().await;

    let mut c = Client::start(DaemonOptions { allow_injection: true, ..opts() });
    let init = c.initialize().await;
    assert_eq!(init["capabilities"]["replayInjection"], true);
    let inject = |t: u64, event: &str, payload: Value| json!({"t_ms": t, "event": event, "payload": payload});
    let (_, r) = c.call(json!(1), "replay/injectEvent", inject(0, "document/didOpen", json!({"uri": URI, "text": TEXT}))).await;
    assert_eq!(r["result"], Value::Null);
    let (_, r) = c.call(json!(2), "replay/injectEvent", inject(1_000_000, "document/didChange", change(43, "#"))).await;
    assert_eq!(r["result"]["version"], 1);
    let (_, r) = c.call(json!(3), "replay/injectEvent", inject(10, "chat/typing", json!({}))).await;
    assert_eq!(error_code(&r), -32018);
    let (_, r) = c.call(json!(4), "replay/injectEvent", inject(1_000_001, "shutdown", json!({}))).await;
    assert_eq!(error_code(&r), -32602);
    let t0 = Instant::now();
    c.until("suggestions/published").await;
    assert!((5_800..5_900).contains(&t0.elapsed().as_millis()));
    c.shutdown().await;
}
