//! A scripted client talking to an in-process daemon over a framed byte pipe,
//! exactly as an editor host would over stdio.
//!
//! `cargo run --example stdio_client`

use std::sync::Arc;

use genied::provider::MockProvider;
use genied::rpc::framing::{read_frame, write_frame, Frame};
use genied::rpc::{serve_stdio, DaemonOptions};
use genied::EngineSettings;
use serde_json::{json, Value};
use tokio::io::{AsyncRead, AsyncWrite, BufReader};

async fn send<W: AsyncWrite + Unpin>(w: &mut W, v: Value) {
    println!("--> {v}");
    write_frame(w, &v.to_string()).await.unwrap();
}

async fn recv<R: AsyncRead + Unpin>(r: &mut BufReader<R>) -> Value {
    let Some(Frame::Message(m)) = read_frame(r).await.unwrap() else { panic!("daemon closed") };
    let v: Value = serde_json::from_str(&m).unwrap();
    let summary = match v.get("method") {
        Some(m) => format!("{m} {}", truncate(&v["params"].to_string())),
        None => truncate(&v.to_string()),
    };
    println!("<-- {summary}");
    v
}

fn truncate(s: &str) -> String {
    if s.chars().count() > 110 {
        format!("{}...", s.chars().take(110).collect::<String>())
    } else {
        s.to_owned()
    }
}

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let (client, server) = tokio::io::duplex(1 << 16);
    let (server_r, server_w) = tokio::io::split(server);
    let mock = Arc::new(MockProvider::new(42).with_latency(200));
    let daemon = tokio::spawn(serve_stdio(DaemonOptions::new(EngineSettings::default(), mock), server_r, server_w));

    let (r, mut w) = tokio::io::split(client);
    let mut r = BufReader::new(r);
    let uri = "file:///demo/calc.py";

    send(&mut w, json!({"jsonrpc": "2.0", "id": 1, "method": "initialize", "params": {"protocolVersion": 1}})).await;
    recv(&mut r).await;
    send(&mut w, json!({"jsonrpc": "2.0", "method": "document/didOpen", "params": {"uri": uri, "text": "class Calculator:\n    pass\n"}})).await;
    send(
        &mut w,
        json!({"jsonrpc": "2.0", "id": 2, "method": "document/didChange", "params": {"uri": uri, "changes": [
            {"range": {"start": 22, "end": 26}, "text": "def add(self, a, b):\n        return a + b"}
        ]}}),
    )
    .await;
    recv(&mut r).await;
    println!("(waiting for the quiet period)");
    let group_id = loop {
        let v = recv(&mut r).await;
        if v["method"] == "suggestions/published" {
            break v["params"]["group"]["id"].as_str().unwrap().to_owned();
        }
    };
    send(&mut w, json!({"jsonrpc": "2.0", "id": 3, "method": "suggestions/accept", "params": {"suggestionId": format!("{group_id}-s1")}})).await;
    recv(&mut r).await;
    recv(&mut r).await;
    send(&mut w, json!({"jsonrpc": "2.0", "id": 4, "method": "shutdown"})).await;
    recv(&mut r).await;
    let summary = daemon.await.unwrap().unwrap();
    println!("session {}: fired {}, published {}, spent {}", summary.session_id, summary.stats.fired, summary.stats.published, summary.totals.cost_micros);
}
