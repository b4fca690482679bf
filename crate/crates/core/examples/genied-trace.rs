//! Trace tooling.
//!
//! `record` serves one stdio session like `genied --stdio` while teeing every
//! inbound engine event into a replayable JSONL trace. `check` validates a
//! trace and summarizes it.
//!
//! `cargo run --example genied-trace -- check traces/typing_burst.jsonl`

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use genied::provider::{HttpProvider, MockProvider, Provider};
use genied::replay::load_trace;
use genied::rpc::{serve_stdio, DaemonOptions};
use genied::Config;

#[derive(Parser)]
#[command(name = "genied-trace", about = "Record and inspect session traces")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve a stdio session and record it.
    Record {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mock: bool,
    },
    /// Validate a trace and count its events.
    Check { trace: PathBuf },
}

fn record(out: PathBuf, config: Option<PathBuf>, mock: bool) -> Result<(), String> {
    let cfg = config.as_deref().map(Config::load).transpose().map_err(|e| e.to_string())?.unwrap_or_default();
    let settings = cfg.engine_settings().map_err(|e| e.to_string())?;
    let provider: Arc<dyn Provider> = if mock {
        Arc::new(MockProvider::new(cfg.provider.mock_seed).with_latency(cfg.provider.mock_latency_ms))
    } else {
        Arc::new(HttpProvider::new(cfg.http_config()).map_err(|e| e.to_string())?)
    };
    let mut opts = DaemonOptions::new(settings, provider);
    opts.record = Some(out);
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let result = rt.block_on(serve_stdio(opts, tokio::io::stdin(), tokio::io::stdout()));
    rt.shutdown_background();
    result.map(|_| ()).map_err(|e| e.to_string())
}

fn check(trace: PathBuf) -> Result<(), String> {
    let events = load_trace(&trace).map_err(|e| e.to_string())?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &events {
        *counts.entry(e.event.as_str()).or_default() += 1;
    }
    let span = events.last().map_or(0, |e| e.t_ms) - events.first().map_or(0, |e| e.t_ms);
    println!("{}: {} events over {span} ms", trace.display(), events.len());
    for (event, n) in counts {
        println!("  {n:>5}  {event}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Args::parse().cmd {
        Cmd::Record { out, config, mock } => record(out, config, mock),
        Cmd::Check { trace } => check(trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("genied-trace: {e}");
            ExitCode::FAILURE
        }
    }
}
