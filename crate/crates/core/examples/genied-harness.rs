//! Runs the three use-case scaffolds under each setting and dumps the
//! suggestions as Markdown for manual relevance review.
//!
//! With `GENIED_API_KEY` set the live backend is used; `--mock` forces the
//! seeded mock. `cargo run --example genied-harness -- --mock`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use genied::harness::{render_markdown, run_all};
use genied::provider::{HttpProvider, MockProvider, Provider, API_KEY_ENV};
use genied::Config;

#[derive(Parser)]
#[command(name = "genied-harness", about = "Use-case scaffolds for manual suggestion inspection")]
struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mock: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Include each rendered prompt in the dump.
    #[arg(long)]
    prompts: bool,
    /// Emit JSON instead of Markdown.
    #[arg(long)]
    json: bool,
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match args.config.as_deref().map(Config::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("genied-harness: {e}");
            return ExitCode::FAILURE;
        }
    };
    let settings = match cfg.engine_settings() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("genied-harness: {e}");
            return ExitCode::FAILURE;
        }
    };
    let http = cfg.http_config();
    let provider: Box<dyn Provider> = if args.mock || http.api_key.is_none() {
        if !args.mock {
            eprintln!("genied-harness: {API_KEY_ENV} not set, using the mock provider");
        }
        Box::new(MockProvider::new(args.seed.unwrap_or(cfg.provider.mock_seed)))
    } else {
        match HttpProvider::new(http) {
            Ok(p) => Box::new(p),
            Err(e) => {
                eprintln!("genied-harness: {e}");
                return ExitCode::FAILURE;
            }
        }
    };
    let runs = run_all(provider.as_ref(), &settings).await;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&runs).expect("runs serialize"));
    } else {
        print!("{}", render_markdown(&runs, args.prompts));
    }
    ExitCode::SUCCESS
}
