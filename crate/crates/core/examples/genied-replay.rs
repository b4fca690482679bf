//! Replays a JSONL trace on a virtual clock against the seeded mock provider
//! and prints a request-count and cost report.
//!
//! `cargo run --example genied-replay -- traces/typing_burst.jsonl --report text`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use genied::replay::{load_trace, replay, ReplayOptions};
use genied::Config;

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Parser)]
#[command(name = "genied-replay", about = "Deterministic trace replay with the mock provider")]
struct Args {
    trace: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mock seed; overrides `provider.mock_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    report: Format,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match args.config.as_deref().map(Config::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("genied-replay: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut opts = match ReplayOptions::from_config(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("genied-replay: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(seed) = args.seed {
        opts.seed = seed;
    }
    let events = match load_trace(&args.trace) {
        Ok(ev) => ev,
        Err(e) => {
            eprintln!("genied-replay: {}: {e}", args.trace.display());
            return ExitCode::FAILURE;
        }
    };
    let report = replay(&events, &opts);
    match args.report {
        Format::Json => print!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    ExitCode::SUCCESS
}
