//! LLM backends: a chat-completions HTTP client and a seeded mock.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio_util::sync::CancellationToken;

use crate::cost::RequestPurpose;
use crate::parser::SuggestionPayload;
use crate::prompt::{PromptBundle, SectionId, SuggestionType, CURSOR_SENTINEL};
use crate::session::Role;

/// Environment variable holding the provider API key.
pub const API_KEY_ENV: &str = "GENIED_API_KEY";
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ProviderError {
    #[error("request timed out")]
    Timeout,
    #[error("provider returned HTTP {0}")]
    HttpError(u16),
    #[error("request was cancelled")]
    Cancelled,
    #[error("provider rate limited the request")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl ProviderError {
    fn is_transient(&self) -> bool {
        matches!(self, ProviderError::RateLimited) || matches!(self, ProviderError::HttpError(s) if *s >= 500)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RequestPayload {
    Proactive(PromptBundle),
    /// Plain chat: history forwarded as-is.
    Chat { turns: Vec<ChatTurn> },
}

impl RequestPayload {
    pub fn purpose(&self) -> RequestPurpose {
        match self {
            RequestPayload::Proactive(_) => RequestPurpose::Proactive,
            RequestPayload::Chat { .. } => RequestPurpose::Chat,
        }
    }

    /// `(role, content)` pairs in chat-completions form.
    pub fn messages(&self) -> Vec<(&'static str, String)> {
        match self {
            RequestPayload::Proactive(b) => {
                let system = b.section(SectionId::SystemPreamble).unwrap_or_default().to_owned();
                vec![("system", system), ("user", b.user_text())]
            }
            RequestPayload::Chat { turns } => turns
                .iter()
                .map(|t| {
                    let role = match t.role {
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    };
                    (role, t.content.clone())
                })
                .collect(),
        }
    }

    pub fn prompt_chars(&self) -> usize {
        self.messages().iter().map(|(_, c)| c.chars().count()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ProviderRequest {
    pub id: u64,
    pub payload: RequestPayload,
    pub model: String,
    pub max_output_tokens: u32,
    pub cancel: CancellationToken,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub raw: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(chars: usize) -> u64 {
    (chars as u64).div_ceil(4)
}

#[async_trait]
pub trait Provider: Send + Sync {
    /// Runs one request to a single terminal outcome. Must observe `req.cancel`.
    async fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError>;
}

/// A scripted reply for [`MockProvider`] fault injection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    Text(String),
    Fail(ProviderError),
}

/// Deterministic stand-in: output is a pure function of the seed and the request content.
#[derive(Debug, Default)]
pub struct MockProvider {
    seed: u64,
    latency_ms: u64,
    script: Mutex<VecDeque<MockReply>>,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            latency_ms: 0,
            script: Mutex::new(VecDeque::new()),
        }
    }

    pub fn with_latency(mut self, latency_ms: u64) -> Self {
        self.latency_ms = latency_ms;
        self
    }

    /// Queues replies that take precedence over generated output, in order.
    pub fn with_script(self, replies: impl IntoIterator<Item = MockReply>) -> Self {
        self.script.lock().expect("mock script lock").extend(replies);
        self
    }

    pub fn latency_ms(&self) -> u64 {
        self.latency_ms
    }

    /// Synchronous core used by both the async path and the replay driver.
    pub fn respond(&self, payload: &RequestPayload) -> Result<ProviderResponse, ProviderError> {
        let scripted = self.script.lock().expect("mock script lock").pop_front();
        let raw = match scripted {
            Some(MockReply::Fail(e)) => return Err(e),
            Some(MockReply::Text(t)) => t,
            None => self.generate(payload),
        };
        Ok(ProviderResponse {
            usage: Usage {
                input_tokens: estimate_tokens(payload.prompt_chars()),
                output_tokens: estimate_tokens(raw.chars().count()),
                estimated: false,
            },
            raw,
            latency_ms: self.latency_ms,
        })
    }

    fn rng_for(&self, payload: &RequestPayload) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        match payload {
            RequestPayload::Proactive(b) => h.update(b.content_hash()),
            RequestPayload::Chat { turns } => {
                for t in turns {
                    h.update([t.role as u8]);
                    h.update((t.content.len() as u64).to_le_bytes());
                    h.update(t.content.as_bytes());
                }
            }
        }
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&h.finalize());
        ChaCha8Rng::from_seed(seed)
    }

    fn generate(&self, payload: &RequestPayload) -> String {
        let mut rng = self.rng_for(payload);
        match payload {
            RequestPayload::Proactive(bundle) => mock_suggestions(bundle, &mut rng),
            RequestPayload::Chat { turns } => {
                let last = turns.last().map(|t| t.content.as_str()).unwrap_or("");
                let snippet: String = last.chars().take(60).collect();
                format!(
                    "(mock #{:04}) You said: \"{snippet}\". I have {} message(s) of context.",
                    rng.random_range(0..10_000),
                    turns.len()
                )
            }
        }
    }
}

fn focus_line(bundle: &PromptBundle) -> String {
    let section = bundle.section(SectionId::CodeContext).unwrap_or_default();
    let (before, after) = section.split_once(CURSOR_SENTINEL).unwrap_or((section, ""));
    // the first line of the section is the file header
    let above = before.lines().skip(1).map(str::trim).filter(|l| !l.is_empty()).last();
    let below = || after.lines().map(str::trim).find(|l| !l.is_empty());
    let line = above.or_else(below).unwrap_or("<empty file>");
    line.chars().take(80).collect()
}

fn template(t: SuggestionType, focus: &str, variant: u32) -> SuggestionPayload {
    let (description, code, explanation) = match t {
        SuggestionType::Improvement => (
            format!("Extract `{focus}` into a small helper to reduce duplication (variant {variant})."),
            format!("def helper():\n    {focus}"),
            "Smaller functions are easier to test and reuse.".to_owned(),
        ),
        SuggestionType::Explanation => (
            format!("Explain what `{focus}` does in context."),
            String::new(),
            format!("This line runs as part of the surrounding block; variant {variant} walks through its inputs and outputs."),
        ),
        SuggestionType::Brainstorm => (
            format!("Consider a feature building on `{focus}` (idea {variant})."),
            String::new(),
            "A natural next step given the current code.".to_owned(),
        ),
        SuggestionType::Test => (
            format!("Add a unit test exercising `{focus}`."),
            format!("def test_case_{variant}():\n    # arrange, act, assert around: {focus}\n    assert True"),
            "Covers the code near the cursor before it grows further.".to_owned(),
        ),
        SuggestionType::BugFix => (
            format!("Check `{focus}` for an unhandled edge case."),
            format!("if value is None:\n    raise ValueError(\"missing value\")  # guard {variant}"),
            "Inputs at the boundary are not validated yet.".to_owned(),
        ),
        SuggestionType::SyntaxHint => (
            format!("A more idiomatic way to write `{focus}`."),
            format!("# idiomatic form {variant}\n{focus}"),
            "Same behavior with clearer syntax.".to_owned(),
        ),
    };
    SuggestionPayload {
        tag: t.id().to_owned(),
        description,
        code,
        explanation,
    }
}

fn mock_suggestions(bundle: &PromptBundle, rng: &mut ChaCha8Rng) -> String {
    let mut pool: Vec<SuggestionType> = if bundle.enabled.is_empty() {
        SuggestionType::ALL.to_vec()
    } else {
        bundle.enabled.clone()
    };
    pool.shuffle(rng);
    let focus = focus_line(bundle);
    let items: Vec<SuggestionPayload> = (0..3)
        .map(|i| template(pool[i % pool.len()], &focus, rng.random_range(1..100)))
        .collect();
    serde_json::to_string_pretty(&items).expect("string-only payload")
}

#[async_trait]
impl Provider for MockProvider {
    async fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        if req.cancel.is_cancelled() {
            return Err(ProviderError::Cancelled);
        }
        if self.latency_ms > 0 {
            tokio::select! {
                _ = req.cancel.cancelled() => return Err(ProviderError::Cancelled),
                _ = tokio::time::sleep(Duration::from_millis(self.latency_ms)) => {}
            }
        }
        self.respond(&req.payload)
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry_backoff: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_owned(),
            api_key: None,
            timeout: Duration::from_millis(DEFAULT_TIMEOUT_MS),
            retry_backoff: Duration::from_secs(1),
        }
    }
}

impl HttpConfig {
    /// Reads the API key from [`API_KEY_ENV`].
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

/// OpenAI-style `/chat/completions` client.
pub struct HttpProvider {
    client: reqwest::Client,
    cfg: HttpConfig,
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    usage: Option<ReportedUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ReportedUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self { client, cfg })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    async fn attempt(&self, req: &ProviderRequest, body: &serde_json::Value) -> Result<ProviderResponse, ProviderError> {
        let started = Instant::now();
        let mut builder = self.client.post(self.url()).json(body);
        if let Some(key) = &self.cfg.api_key {
            builder = builder.bearer_auth(key);
        }
        let send = async {
            let resp = builder
                .send()
                .await
                .map_err(|e| ProviderError::Transport(e.to_string()))?;
            let status = resp.status().as_u16();
            if status == 429 {
                return Err(ProviderError::RateLimited);
            }
            if !(200..300).contains(&status) {
                return Err(ProviderError::HttpError(status));
            }
            resp.text().await.map_err(|e| ProviderError::Transport(e.to_string()))
        };
        let text = tokio::select! {
            _ = req.cancel.cancelled() => return Err(ProviderError::Cancelled),
            r = tokio::time::timeout(self.cfg.timeout, send) => r.map_err(|_| ProviderError::Timeout)??,
        };
        let parsed: CompletionBody =
            serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let raw = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("no message content".into()))?;
        let usage = match parsed.usage {
            Some(u) => Usage {
                input_tokens: u.prompt_tokens,
                output_tokens: u.completion_tokens,
                estimated: false,
            },
            None => Usage {
                input_tokens: estimate_tokens(req.payload.prompt_chars()),
                output_tokens: estimate_tokens(raw.chars().count()),
                estimated: true,
            },
        };
        Ok(ProviderResponse {
            raw,
            usage,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

/// Request body in chat-completions form.
pub fn completion_body(req: &ProviderRequest) -> serde_json::Value {
    let messages: Vec<_> = req
        .payload
        .messages()
        .into_iter()
        .map(|(role, content)| json!({ "role": role, "content": content }))
        .collect();
    json!({
        "model": req.model,
        "max_tokens": req.max_output_tokens,
        "messages": messages,
    })
}

#[async_trait]
impl Provider for HttpProvider {
    async fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        if req.cancel.is_cancelled() {
            return Err(ProviderError::Cancelled);
        }
        let body = completion_body(req);
        match self.attempt(req, &body).await {
            Err(e) if e.is_transient() => {
                tracing::warn!(request = req.id, error = %e, "transient provider error, retrying once");
                tokio::select! {
                    _ = req.cancel.cancelled() => return Err(ProviderError::Cancelled),
                    _ = tokio::time::sleep(self.cfg.retry_backoff) => {}
                }
                self.attempt(req, &body).await
            }
            other => other,
        }
    }
}
