//! Proactive coding-assistant engine.
//!
//! The engine watches a mirrored editor buffer and chat activity, decides when
//! to ask an LLM for unsolicited suggestions, parses the reply into groups of
//! up to three tagged suggestions, and keeps the chat session and cost ledger
//! consistent. Editors talk to it over JSON-RPC (stdio or WebSocket).
//!
//! | module | role |
//! |---|---|
//! | [`workspace`] | document mirror and cursor-centred context window |
//! | [`scheduler`] | debounce and suppression state machine |
//! | [`prompt`] | suggestion types and prompt assembly |
//! | [`provider`] | HTTP chat-completions client and seeded mock |
//! | [`parser`] | model output → [`parser::SuggestionGroup`] |
//! | [`session`] | chat history and suggestion lifecycle |
//! | [`cost`] | pricing, `f · c` totals, proactivity multiplier |
//! | [`engine`] | the sans-io event path combining the above |
//! | [`rpc`] | JSON-RPC 2.0 server |
//! | [`replay`] | deterministic trace replay and cost reports |
//! | [`harness`] | canned use-case scaffolds for manual inspection |

pub mod config;
pub mod cost;
pub mod engine;
pub mod harness;
pub mod parser;
pub mod prompt;
pub mod provider;
pub mod replay;
pub mod rpc;
pub mod scheduler;
pub mod session;
pub mod workspace;

pub use config::{Config, EngineSettings};
pub use engine::{Effect, Engine, Notification};
