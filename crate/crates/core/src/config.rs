//! Daemon configuration document (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, PricingTable, CODESTRAL, GPT_4O};
use crate::prompt::{AliasTable, PromptAssets, PromptConfig, PromptError, DEFAULT_HISTORY_MESSAGES};
use crate::provider::{HttpConfig, DEFAULT_BASE_URL, DEFAULT_TIMEOUT_MS};
use crate::scheduler::{SchedulerConfig, SchedulerError};
use crate::workspace::DEFAULT_WINDOW;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Pricing(#[from] CostError),
    #[error("context.window must be positive")]
    ZeroWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextSection {
    pub window: usize,
}

impl Default for ContextSection {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub history_messages: usize,
    pub assets_dir: Option<PathBuf>,
    /// Extra label → canonical type aliases.
    pub aliases: BTreeMap<String, String>,
}

impl Default for PromptSection {
    fn default() -> Self {
        Self {
            history_messages: DEFAULT_HISTORY_MESSAGES,
            assets_dir: None,
            aliases: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub model: String,
    pub base_url: String,
    pub timeout_ms: u64,
    pub mock_seed: u64,
    /// Simulated response time of the mock provider.
    pub mock_latency_ms: u64,
    pub max_output_tokens: u32,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self {
            model: GPT_4O.to_owned(),
            base_url: DEFAULT_BASE_URL.to_owned(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            mock_seed: 42,
            mock_latency_ms: 800,
            max_output_tokens: 1_024,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingSection {
    pub table_path: Option<PathBuf>,
}

/// Assumptions for the autocomplete baseline in cost reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub autocomplete_model: String,
    pub autocomplete_output_tokens: u64,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            autocomplete_model: CODESTRAL.to_owned(),
            autocomplete_output_tokens: 32,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub log_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpcSection {
    /// Enables the privileged `replay/injectEvent` method.
    pub allow_replay_injection: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scheduler: SchedulerConfig,
    pub context: ContextSection,
    pub prompt: PromptSection,
    pub provider: ProviderSection,
    pub pricing: PricingSection,
    pub cost: CostSection,
    pub session: SessionSection,
    pub rpc: RpcSection,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Everything the engine needs, with files loaded and tables built.
#[derive(Debug, Clone)]
pub struct EngineSettings {
    pub scheduler: SchedulerConfig,
    pub window: usize,
    pub prompt: PromptConfig,
    pub aliases: AliasTable,
    pub pricing: PricingTable,
    pub model: String,
    pub max_output_tokens: u32,
    pub autocomplete_model: String,
    pub autocomplete_output_tokens: u64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Config::default().engine_settings().expect("default config is valid")
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(s)?;
        cfg.scheduler.validate()?;
        if cfg.context.window == 0 {
            return Err(ConfigError::ZeroWindow);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn engine_settings(&self) -> Result<EngineSettings, ConfigError> {
        self.scheduler.validate()?;
        let assets = match &self.prompt.assets_dir {
            Some(dir) => PromptAssets::load_dir(&self.resolve(dir))?,
            None => PromptAssets::default(),
        };
        let aliases = AliasTable::default()
            .with_overrides(self.prompt.aliases.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        let pricing = match &self.pricing.table_path {
            Some(p) => PricingTable::load(&self.resolve(p))?,
            None => PricingTable::default(),
        };
        Ok(EngineSettings {
            scheduler: self.scheduler,
            window: self.context.window,
            prompt: PromptConfig {
                history_messages: self.prompt.history_messages,
                assets,
            },
            aliases,
            pricing,
            model: self.provider.model.clone(),
            max_output_tokens: self.provider.max_output_tokens,
            autocomplete_model: self.cost.autocomplete_model.clone(),
            autocomplete_output_tokens: self.cost.autocomplete_output_tokens,
        })
    }

    /// HTTP client settings; the key comes from the environment only.
    pub fn http_config(&self) -> HttpConfig {
        HttpConfig {
            base_url: self.provider.base_url.clone(),
            timeout: Duration::from_millis(self.provider.timeout_ms),
            ..HttpConfig::default()
        }
        .with_env_key()
    }

    pub fn session_log_path(&self) -> Option<PathBuf> {
        self.session.log_path.as_deref().map(|p| self.resolve(p))
    }
}
