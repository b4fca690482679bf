//! Mirrored documents and the cursor-centred code context window.
//!
//! All offsets are character offsets (Unicode scalar values). The daemon never
//! re-encodes positions; clients that count in another unit must convert before
//! sending.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of characters taken on each side of the cursor.
pub const DEFAULT_WINDOW: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkspaceError {
    #[error("offset range [{start}, {end}) out of bounds for document of length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("unknown document: {0}")]
    UnknownDocument(String),
    #[error("context window must be positive")]
    ZeroWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub uri: String,
    text: String,
    char_len: usize,
    pub version: u64,
}

impl Document {
    pub fn new(uri: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let char_len = text.chars().count();
        Self {
            uri: uri.into(),
            text,
            char_len,
            version: 0,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Length in characters.
    pub fn len(&self) -> usize {
        self.char_len
    }

    pub fn is_empty(&self) -> bool {
        self.char_len == 0
    }

    /// Replaces the character range `[start, end)` with `new_text` and bumps the version.
    pub fn apply_change(&mut self, start: usize, end: usize, new_text: &str) -> Result<(), WorkspaceError> {
        if start > end || end > self.char_len {
            return Err(WorkspaceError::OutOfRange {
                start,
                end,
                len: self.char_len,
            });
        }
        let byte_start = self.byte_offset(start);
        let byte_end = self.byte_offset(end);
        self.text.replace_range(byte_start..byte_end, new_text);
        self.char_len = self.char_len - (end - start) + new_text.chars().count();
        self.version += 1;
        Ok(())
    }

    /// Replaces the whole text, as a full-document sync would.
    pub fn replace_all(&mut self, new_text: &str) {
        self.text = new_text.to_owned();
        self.char_len = self.text.chars().count();
        self.version += 1;
    }

    /// Characters `[start, end)`; callers guarantee `start <= end <= len`.
    fn slice(&self, start: usize, end: usize) -> &str {
        &self.text[self.byte_offset(start)..self.byte_offset(end)]
    }

    fn byte_offset(&self, char_offset: usize) -> usize {
        if char_offset == self.char_len {
            return self.text.len();
        }
        self.text
            .char_indices()
            .nth(char_offset)
            .map(|(i, _)| i)
            .unwrap_or(self.text.len())
    }

    /// Cuts the context window around `offset`. The character at the cursor goes to `after`.
    pub fn extract_context(&self, offset: usize, window: usize) -> Result<CodeContext, WorkspaceError> {
        if window == 0 {
            return Err(WorkspaceError::ZeroWindow);
        }
        if offset > self.char_len {
            return Err(WorkspaceError::OutOfRange {
                start: offset,
                end: offset,
                len: self.char_len,
            });
        }
        let lo = offset.saturating_sub(window);
        let hi = offset.saturating_add(window).min(self.char_len);
        Ok(CodeContext {
            uri: self.uri.clone(),
            before: self.slice(lo, offset).to_owned(),
            after: self.slice(offset, hi).to_owned(),
            window,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cursor<'a> {
    pub uri: &'a str,
    pub offset: usize,
}

/// Text surrounding the cursor in a single file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeContext {
    pub uri: String,
    pub before: String,
    pub after: String,
    pub window: usize,
}

/// Free-function form of [`Document::extract_context`].
pub fn extract_context(doc: &Document, cursor: Cursor<'_>, window: usize) -> Result<CodeContext, WorkspaceError> {
    if cursor.uri != doc.uri {
        return Err(WorkspaceError::UnknownDocument(cursor.uri.to_owned()));
    }
    doc.extract_context(cursor.offset, window)
}

/// A single edit in a `document/didChange` batch. A missing range means full replacement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<OffsetRange>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetRange {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ActiveCursor {
    uri: String,
    offset: usize,
}

/// All open documents plus the single active cursor that sources code context.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    docs: BTreeMap<String, Document>,
    cursor: Option<ActiveCursor>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn document(&self, uri: &str) -> Option<&Document> {
        self.docs.get(uri)
    }

    /// Opens (or reopens) a document and places the cursor at its start if no cursor exists yet.
    pub fn open(&mut self, uri: &str, text: &str) {
        self.docs.insert(uri.to_owned(), Document::new(uri, text));
        match &mut self.cursor {
            Some(c) if c.uri == uri => c.offset = 0,
            None => {
                self.cursor = Some(ActiveCursor {
                    uri: uri.to_owned(),
                    offset: 0,
                })
            }
            Some(_) => {}
        }
    }

    /// Applies a batch atomically: either every change lands or the document is untouched.
    /// The cursor follows the end of the last edit.
    pub fn apply_changes(&mut self, uri: &str, changes: &[TextChange]) -> Result<u64, WorkspaceError> {
        let doc = self
            .docs
            .get(uri)
            .ok_or_else(|| WorkspaceError::UnknownDocument(uri.to_owned()))?;
        let mut next = doc.clone();
        let mut cursor = None;
        for change in changes {
            match change.range {
                Some(r) => {
                    next.apply_change(r.start, r.end, &change.text)?;
                    cursor = Some(r.start + change.text.chars().count());
                }
                None => {
                    next.replace_all(&change.text);
                    cursor = Some(next.len());
                }
            }
        }
        let version = next.version;
        self.docs.insert(uri.to_owned(), next);
        if let Some(offset) = cursor {
            self.cursor = Some(ActiveCursor {
                uri: uri.to_owned(),
                offset,
            });
        }
        Ok(version)
    }

    pub fn move_cursor(&mut self, uri: &str, offset: usize) -> Result<(), WorkspaceError> {
        let doc = self
            .docs
            .get(uri)
            .ok_or_else(|| WorkspaceError::UnknownDocument(uri.to_owned()))?;
        if offset > doc.len() {
            return Err(WorkspaceError::OutOfRange {
                start: offset,
                end: offset,
                len: doc.len(),
            });
        }
        self.cursor = Some(ActiveCursor {
            uri: uri.to_owned(),
            offset,
        });
        Ok(())
    }

    pub fn cursor(&self) -> Option<Cursor<'_>> {
        self.cursor.as_ref().map(|c| Cursor {
            uri: &c.uri,
            offset: c.offset,
        })
    }

    /// Context around the active cursor, or `None` when nothing is open.
    pub fn active_context(&self, window: usize) -> Option<Result<CodeContext, WorkspaceError>> {
        let cursor = self.cursor()?;
        let doc = self.docs.get(cursor.uri)?;
        Some(extract_context(doc, cursor, window))
    }
}
