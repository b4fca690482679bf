//! Prompt assembly for proactive suggestion requests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::session::{ChatMessage, Role};
use crate::workspace::CodeContext;

/// Marks the cursor position inside the rendered code context.
pub const CURSOR_SENTINEL: &str = "<|cursor|>";
/// Longest accepted task description, in characters.
pub const MAX_TASK_CHARS: usize = 8_000;
pub const DEFAULT_HISTORY_MESSAGES: usize = 10;

const DEFAULT_PREAMBLE: &str = include_str!("../assets/system_preamble.txt");
const DEFAULT_FORMAT: &str = include_str!("../assets/format_instructions.txt");
const DEFAULT_ONE_SHOT: &str = include_str!("../assets/one_shot_example.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown suggestion type: {0:?}")]
    UnknownType(String),
    #[error("at least one suggestion type must be enabled")]
    EmptyTypeSet,
    #[error("task description is {len} characters; the limit is {MAX_TASK_CHARS}")]
    TaskTooLong { len: usize },
    #[error("failed to read prompt asset {path}: {source}")]
    Asset {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The six canonical suggestion categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuggestionType {
    Improvement,
    Explanation,
    Brainstorm,
    Test,
    BugFix,
    SyntaxHint,
}

impl SuggestionType {
    pub const ALL: [SuggestionType; 6] = [
        SuggestionType::Improvement,
        SuggestionType::Explanation,
        SuggestionType::Brainstorm,
        SuggestionType::Test,
        SuggestionType::BugFix,
        SuggestionType::SyntaxHint,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SuggestionType::Improvement => "improvement",
            SuggestionType::Explanation => "explanation",
            SuggestionType::Brainstorm => "brainstorm",
            SuggestionType::Test => "test",
            SuggestionType::BugFix => "bug-fix",
            SuggestionType::SyntaxHint => "syntax-hint",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SuggestionType::Improvement => "code improvements",
            SuggestionType::Explanation => "code explanations",
            SuggestionType::Brainstorm => "brainstorming ideas",
            SuggestionType::Test => "additional testing",
            SuggestionType::BugFix => "bug fixes",
            SuggestionType::SyntaxHint => "syntax hints",
        }
    }
}

impl fmt::Display for SuggestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SuggestionType {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AliasTable::default().resolve(s)
    }
}

/// Case-insensitive label → canonical type mapping. Extendable from config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasTable {
    entries: BTreeMap<String, SuggestionType>,
}

impl Default for AliasTable {
    fn default() -> Self {
        use SuggestionType::*;
        let mut entries = BTreeMap::new();
        for t in SuggestionType::ALL {
            entries.insert(t.id().to_owned(), t);
            entries.insert(t.label().to_owned(), t);
        }
        let aliases = [
            ("improvements", Improvement),
            ("efficiency", Improvement),
            ("explanations", Explanation),
            ("ideas", Brainstorm),
            ("brainstorming", Brainstorm),
            ("testing", Test),
            ("tests", Test),
            ("unit testing", Test),
            ("debugging", BugFix),
            ("bug fix", BugFix),
            ("bugfix", BugFix),
            ("syntax", SyntaxHint),
            ("syntax hint", SyntaxHint),
        ];
        for (label, t) in aliases {
            entries.insert(label.to_owned(), t);
        }
        Self { entries }
    }
}

impl AliasTable {
    /// Adds or overrides aliases. Targets must themselves resolve in the default table.
    pub fn with_overrides<'a>(
        mut self,
        overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, PromptError> {
        let base = AliasTable::default();
        for (label, target) in overrides {
            let t = base.resolve(target)?;
            self.entries.insert(normalize(label), t);
        }
        Ok(self)
    }

    pub fn resolve(&self, label: &str) -> Result<SuggestionType, PromptError> {
        self.entries
            .get(&normalize(label))
            .copied()
            .ok_or_else(|| PromptError::UnknownType(label.to_owned()))
    }
}

fn normalize(label: &str) -> String {
    label.trim().to_lowercase()
}

/// Resolves a user-facing label against the built-in alias table.
pub fn resolve_type(label: &str) -> Result<SuggestionType, PromptError> {
    AliasTable::default().resolve(label)
}

/// Nonempty set of enabled suggestion types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SuggestionType>", into = "Vec<SuggestionType>")]
pub struct EnabledTypes(BTreeSet<SuggestionType>);

impl EnabledTypes {
    pub fn new(types: impl IntoIterator<Item = SuggestionType>) -> Result<Self, PromptError> {
        let set: BTreeSet<_> = types.into_iter().collect();
        if set.is_empty() {
            return Err(PromptError::EmptyTypeSet);
        }
        Ok(Self(set))
    }

    pub fn all() -> Self {
        Self(SuggestionType::ALL.into_iter().collect())
    }

    pub fn from_labels<S: AsRef<str>>(aliases: &AliasTable, labels: &[S]) -> Result<Self, PromptError> {
        let types = labels
            .iter()
            .map(|l| aliases.resolve(l.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(types)
    }

    pub fn contains(&self, t: SuggestionType) -> bool {
        self.0.contains(&t)
    }

    pub fn iter(&self) -> impl Iterator<Item = SuggestionType> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for EnabledTypes {
    fn default() -> Self {
        Self::all()
    }
}

impl TryFrom<Vec<SuggestionType>> for EnabledTypes {
    type Error = PromptError;

    fn try_from(v: Vec<SuggestionType>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<EnabledTypes> for Vec<SuggestionType> {
    fn from(e: EnabledTypes) -> Self {
        e.0.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskSource {
    #[default]
    User,
    ImportedTicket,
}

/// Goal text steering the suggestions. Stored verbatim.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescription {
    text: String,
    pub source: TaskSource,
}

impl TaskDescription {
    pub fn new(text: impl Into<String>, source: TaskSource) -> Result<Self, PromptError> {
        let text = text.into();
        let len = text.chars().count();
        if len > MAX_TASK_CHARS {
            return Err(PromptError::TaskTooLong { len });
        }
        Ok(Self { text, source })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_empty(&self) -> bool {
        self.text.trim().is_empty()
    }
}

/// The static prompt texts. Loaded from the packaged defaults or a directory override.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptAssets {
    pub system_preamble: String,
    pub format_instructions: String,
    pub one_shot_example: String,
}

impl Default for PromptAssets {
    fn default() -> Self {
        Self {
            system_preamble: DEFAULT_PREAMBLE.to_owned(),
            format_instructions: DEFAULT_FORMAT.to_owned(),
            one_shot_example: DEFAULT_ONE_SHOT.to_owned(),
        }
    }
}

impl PromptAssets {
    /// Reads `system_preamble.txt`, `format_instructions.txt`, and `one_shot_example.txt`
    /// from `dir`. Missing files fall back to the packaged defaults.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str, fallback: &str| -> Result<String, PromptError> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(s) => Ok(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(fallback.to_owned()),
                Err(source) => Err(PromptError::Asset {
                    path: path.display().to_string(),
                    source,
                }),
            }
        };
        Ok(Self {
            system_preamble: read("system_preamble.txt", DEFAULT_PREAMBLE)?,
            format_instructions: read("format_instructions.txt", DEFAULT_FORMAT)?,
            one_shot_example: read("one_shot_example.txt", DEFAULT_ONE_SHOT)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionId {
    SystemPreamble,
    FormatInstructions,
    OneShotExample,
    EnabledTypes,
    TaskDescription,
    ChatHistory,
    CodeContext,
}

impl SectionId {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionId::SystemPreamble => "system-preamble",
            SectionId::FormatInstructions => "format-instructions",
            SectionId::OneShotExample => "one-shot-example",
            SectionId::EnabledTypes => "enabled-types",
            SectionId::TaskDescription => "task-description",
            SectionId::ChatHistory => "chat-history",
            SectionId::CodeContext => "code-context",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub id: SectionId,
    pub text: String,
}

/// A fully assembled proactive request, sections in their fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub sections: Vec<PromptSection>,
    pub model: String,
    /// Types the response may use; the parser filters against the same set.
    pub enabled: Vec<SuggestionType>,
}

impl PromptBundle {
    pub fn section(&self, id: SectionId) -> Option<&str> {
        self.sections.iter().find(|s| s.id == id).map(|s| s.text.as_str())
    }

    pub fn section_ids(&self) -> Vec<SectionId> {
        self.sections.iter().map(|s| s.id).collect()
    }

    /// Everything after the system preamble, joined as the user turn.
    pub fn user_text(&self) -> String {
        self.sections
            .iter()
            .filter(|s| s.id != SectionId::SystemPreamble)
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn render(&self) -> String {
        self.sections
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn char_count(&self) -> usize {
        self.sections.iter().map(|s| s.text.chars().count()).sum()
    }

    /// SHA-256 over section ids and texts.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for s in &self.sections {
            h.update(s.id.as_str().as_bytes());
            h.update([0u8]);
            h.update((s.text.len() as u64).to_le_bytes());
            h.update(s.text.as_bytes());
        }
        h.update(self.model.as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptConfig {
    pub history_messages: usize,
    pub assets: PromptAssets,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            history_messages: DEFAULT_HISTORY_MESSAGES,
            assets: PromptAssets::default(),
        }
    }
}

/// Renders `before<|cursor|>after`.
pub fn render_context_body(ctx: &CodeContext) -> String {
    let mut body = String::with_capacity(ctx.before.len() + CURSOR_SENTINEL.len() + ctx.after.len());
    body.push_str(&ctx.before);
    body.push_str(CURSOR_SENTINEL);
    body.push_str(&ctx.after);
    body
}

fn code_context_header(ctx: &CodeContext) -> String {
    format!("Current file: {}\n", ctx.uri)
}

/// Splits a rendered code-context section into its header and body.
pub fn code_context_body<'a>(section: &'a str, ctx_uri: &str) -> Option<&'a str> {
    section.strip_prefix(&format!("Current file: {ctx_uri}\n"))
}

fn enabled_types_text(enabled: &EnabledTypes) -> String {
    let mut s = String::from("Enabled suggestion types (tag: meaning):");
    for t in enabled.iter() {
        s.push_str(&format!("\n- {}: {}", t.id(), t.label()));
    }
    s
}

fn history_text(history: &[ChatMessage], keep: usize) -> Option<String> {
    let start = history.len().saturating_sub(keep);
    let recent = &history[start..];
    if recent.is_empty() {
        return None;
    }
    let mut s = String::from("Recent chat history (oldest first):");
    for m in recent {
        let role = match m.role {
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        s.push_str(&format!("\n{role}: {}", m.body));
    }
    Some(s)
}

pub fn build_prompt(
    ctx: &CodeContext,
    history: &[ChatMessage],
    task: &TaskDescription,
    enabled: &EnabledTypes,
    cfg: &PromptConfig,
    model: &str,
) -> Result<PromptBundle, PromptError> {
    if enabled.is_empty() {
        return Err(PromptError::EmptyTypeSet);
    }
    let mut sections = vec![
        PromptSection {
            id: SectionId::SystemPreamble,
            text: cfg.assets.system_preamble.clone(),
        },
        PromptSection {
            id: SectionId::FormatInstructions,
            text: cfg.assets.format_instructions.clone(),
        },
        PromptSection {
            id: SectionId::OneShotExample,
            text: cfg.assets.one_shot_example.clone(),
        },
        PromptSection {
            id: SectionId::EnabledTypes,
            text: enabled_types_text(enabled),
        },
    ];
    if !task.is_empty() {
        sections.push(PromptSection {
            id: SectionId::TaskDescription,
            text: format!("Task description:\n{}", task.text()),
        });
    }
    if let Some(text) = history_text(history, cfg.history_messages) {
        sections.push(PromptSection {
            id: SectionId::ChatHistory,
            text,
        });
    }
    sections.push(PromptSection {
        id: SectionId::CodeContext,
        text: format!("{}{}", code_context_header(ctx), render_context_body(ctx)),
    });
    Ok(PromptBundle {
        sections,
        model: model.to_owned(),
        enabled: enabled.iter().collect(),
    })
}
