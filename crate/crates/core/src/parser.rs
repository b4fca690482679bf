//! Parsing model output into suggestion groups.
//!
//! Accepted shape: a JSON array of objects carrying `tag`, `description`,
//! `code`, and `explanation`, optionally wrapped in a markdown code fence.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::prompt::{AliasTable, EnabledTypes, SuggestionType};
use crate::scheduler::Millis;

/// Groups target this many suggestions; extras are dropped.
pub const GROUP_SIZE: usize = 3;
/// Display width for descriptions. Stored text is never cut.
pub const DESCRIPTION_DISPLAY_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("response is not a JSON array of objects: {0}")]
    ParseFailure(String),
    #[error("no suggestion survived validation")]
    EmptyGroup,
    #[error("no item carries both a tag and a description")]
    SchemaViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuggestionState {
    Temporary,
    Accepted,
    Dismissed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: String,
    pub tag: SuggestionType,
    pub description: String,
    pub code: String,
    pub explanation: String,
    pub state: SuggestionState,
}

impl Suggestion {
    /// Description shortened for display, with a trailing ellipsis when cut.
    pub fn display_description(&self) -> String {
        if self.description.chars().count() <= DESCRIPTION_DISPLAY_CHARS {
            return self.description.clone();
        }
        let mut s: String = self.description.chars().take(DESCRIPTION_DISPLAY_CHARS - 1).collect();
        s.push('…');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuggestionGroup {
    pub id: String,
    pub suggestions: Vec<Suggestion>,
    pub created_at: Millis,
    pub retained: bool,
}

impl SuggestionGroup {
    pub fn get(&self, suggestion_id: &str) -> Option<&Suggestion> {
        self.suggestions.iter().find(|s| s.id == suggestion_id)
    }

    pub fn get_mut(&mut self, suggestion_id: &str) -> Option<&mut Suggestion> {
        self.suggestions.iter_mut().find(|s| s.id == suggestion_id)
    }
}

/// Why an individual item was dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ParseWarning {
    MissingField { index: usize },
    UnknownTag { index: usize, tag: String },
    DisabledTag { index: usize, tag: SuggestionType },
    Truncated { dropped: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub group: SuggestionGroup,
    pub warnings: Vec<ParseWarning>,
}

/// Wire shape of a single suggestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionPayload {
    pub tag: String,
    pub description: String,
    #[serde(default)]
    pub code: String,
    #[serde(default)]
    pub explanation: String,
}

/// Removes one surrounding ``` fence (with optional language tag) if present.
pub fn strip_fences(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return t;
    };
    // drop the info string on the opening line
    match body.find('\n') {
        Some(nl) => body[nl + 1..].trim(),
        None => body.trim(),
    }
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Some(s.clone()),
        _ => None,
    }
}

/// Parses raw model text. `group_id` and `created_at` come from the caller so ids stay deterministic.
pub fn parse_response(
    raw: &str,
    enabled: &EnabledTypes,
    aliases: &AliasTable,
    group_id: &str,
    created_at: Millis,
) -> Result<Parsed, ParseError> {
    let body = strip_fences(raw);
    let value: Value = serde_json::from_str(body).map_err(|e| ParseError::ParseFailure(e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(ParseError::ParseFailure("top-level value is not an array".into()));
    };
    let mut objects = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        match item {
            Value::Object(o) => objects.push(o),
            _ => return Err(ParseError::ParseFailure(format!("item {i} is not an object"))),
        }
    }
    if objects.is_empty() {
        return Err(ParseError::EmptyGroup);
    }

    let mut warnings = Vec::new();
    let mut suggestions = Vec::new();
    let mut well_formed = 0usize;
    for (index, obj) in objects.iter().enumerate() {
        let tag = string_field(obj, "tag");
        let description = string_field(obj, "description").filter(|d| !d.trim().is_empty());
        let (Some(tag), Some(description)) = (tag, description) else {
            warnings.push(ParseWarning::MissingField { index });
            continue;
        };
        well_formed += 1;
        let resolved = match aliases.resolve(&tag) {
            Ok(t) => t,
            Err(_) => {
                warnings.push(ParseWarning::UnknownTag { index, tag });
                continue;
            }
        };
        if !enabled.contains(resolved) {
            warnings.push(ParseWarning::DisabledTag { index, tag: resolved });
            continue;
        }
        suggestions.push(Suggestion {
            id: String::new(),
            tag: resolved,
            description,
            code: string_field(obj, "code").unwrap_or_default(),
            explanation: string_field(obj, "explanation").unwrap_or_default(),
            state: SuggestionState::Temporary,
        });
    }
    if well_formed == 0 {
        return Err(ParseError::SchemaViolation);
    }
    if suggestions.is_empty() {
        return Err(ParseError::EmptyGroup);
    }
    if suggestions.len() > GROUP_SIZE {
        warnings.push(ParseWarning::Truncated {
            dropped: suggestions.len() - GROUP_SIZE,
        });
        suggestions.truncate(GROUP_SIZE);
    }
    for (i, s) in suggestions.iter_mut().enumerate() {
        s.id = format!("{group_id}-s{}", i + 1);
    }
    Ok(Parsed {
        group: SuggestionGroup {
            id: group_id.to_owned(),
            suggestions,
            created_at,
            retained: false,
        },
        warnings,
    })
}

/// Byte-level entry point; invalid UTF-8 is a parse failure.
pub fn parse_response_bytes(
    raw: &[u8],
    enabled: &EnabledTypes,
    aliases: &AliasTable,
    group_id: &str,
    created_at: Millis,
) -> Result<Parsed, ParseError> {
    let text = std::str::from_utf8(raw).map_err(|e| ParseError::ParseFailure(e.to_string()))?;
    parse_response(text, enabled, aliases, group_id, created_at)
}

/// Emits the exact JSON shape [`parse_response`] accepts.
pub fn serialize_group(group: &SuggestionGroup) -> String {
    let payload: Vec<SuggestionPayload> = group
        .suggestions
        .iter()
        .map(|s| SuggestionPayload {
            tag: s.tag.id().to_owned(),
            description: s.description.clone(),
            code: s.code.clone(),
            explanation: s.explanation.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&payload).expect("string-only payload always serializes")
}
