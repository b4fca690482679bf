//! `genied`: the proactive-assistant daemon.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use tokio_util::sync::CancellationToken;
use tracing_subscriber::EnvFilter;

use genied::provider::{HttpProvider, MockProvider, Provider, API_KEY_ENV};
use genied::rpc::{bind_ws, serve_stdio, serve_ws, DaemonOptions};
use genied::Config;

#[derive(Parser, Debug)]
#[command(name = "genied", version, about = "Proactive coding-assistant daemon (JSON-RPC over stdio or WebSocket)")]
struct Cli {
    /// Serve one session on stdin/stdout with Content-Length framing (default).
    #[arg(long, conflicts_with = "ws")]
    stdio: bool,
    /// Serve WebSocket clients on 127.0.0.1:<PORT>.
    #[arg(long, value_name = "PORT")]
    ws: Option<u16>,
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Use the deterministic mock provider instead of the HTTP backend.
    #[arg(long)]
    mock: bool,
    /// Mock seed; overrides `provider.mock_seed`.
    #[arg(long, requires = "mock")]
    seed: Option<u64>,
    /// Tee inbound engine events into a replayable JSONL trace.
    #[arg(long, value_name = "TRACE")]
    record: Option<PathBuf>,
}

async fn run(cli: Cli) -> Result<(), String> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    let settings = cfg.engine_settings().map_err(|e| e.to_string())?;
    let provider: Arc<dyn Provider> = if cli.mock {
        let seed = cli.seed.unwrap_or(cfg.provider.mock_seed);
        Arc::new(MockProvider::new(seed).with_latency(cfg.provider.mock_latency_ms))
    } else {
        let http = cfg.http_config();
        if http.api_key.is_none() {
            return Err(format!("{API_KEY_ENV} is not set; export it or run with --mock"));
        }
        Arc::new(HttpProvider::new(http).map_err(|e| e.to_string())?)
    };
    let opts = DaemonOptions {
        settings,
        provider,
        allow_injection: cfg.rpc.allow_replay_injection,
        session_log: cfg.session_log_path(),
        record: cli.record,
    };

    match cli.ws {
        Some(port) => {
            let listener = bind_ws(port).await.map_err(|e| format!("cannot bind port {port}: {e}"))?;
            let addr = listener.local_addr().map_err(|e| e.to_string())?;
            tracing::info!(%addr, "listening for websocket clients");
            let shutdown = CancellationToken::new();
            let on_signal = shutdown.clone();
            tokio::spawn(async move {
                let _ = tokio::signal::ctrl_c().await;
                on_signal.cancel();
            });
            serve_ws(listener, opts, shutdown).await.map_err(|e| e.to_string())
        }
        None => {
            let summary = serve_stdio(opts, tokio::io::stdin(), tokio::io::stdout())
                .await
                .map_err(|e| e.to_string())?;
            tracing::info!(
                fired = summary.stats.fired,
                published = summary.stats.published,
                cost = %summary.totals.cost_micros,
                "stdio session closed"
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .with_env_filter(EnvFilter::try_from_env("GENIED_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("genied: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    let result = rt.block_on(run(cli));
    // a blocking stdin read would otherwise hold the runtime open
    rt.shutdown_background();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("genied: {e}");
            ExitCode::FAILURE
        }
    }
}
