//! Chat session with keep-on-refresh: an accepted suggestion becomes an
//! assistant message and its group survives later refreshes at its anchor.
//!
//! `cargo run --example session_lifecycle`

use genied::parser::{parse_response, SuggestionGroup};
use genied::prompt::{AliasTable, EnabledTypes};
use genied::session::{Role, SessionConfig, SessionState};

fn group(id: &str, at: u64) -> SuggestionGroup {
    let raw = r#"[
      {"tag": "test", "description": "Test add with negatives", "code": "assert c.add(-1, 1) == 0", "explanation": ""},
      {"tag": "brainstorm", "description": "Add a memory register", "code": "", "explanation": "M+, M-, MR like a desk calculator."},
      {"tag": "bug-fix", "description": "Guard divide by zero", "code": "if b == 0: raise ZeroDivisionError", "explanation": ""}
    ]"#;
    parse_response(raw, &EnabledTypes::all(), &AliasTable::default(), id, at).unwrap().group
}

fn main() {
    let mut s = SessionState::new(SessionConfig::new("gpt-4o"));
    s.append_message(Role::User, "what should I build next?", 0);

    s.publish_group(group("g1", 5_000));
    let idx = s.accept_suggestion("g1-s2", 6_000).unwrap();
    println!("accepted into message {idx}:\n{}\n", s.messages()[idx].body);

    let outcome = s.publish_group(group("g2", 12_000));
    println!("refresh: cleared {:?}, retained {:?}", outcome.cleared, outcome.retained);
    let outcome = s.publish_group(group("g3", 20_000));
    println!("refresh: cleared {:?}, retained {:?}", outcome.cleared, outcome.retained);

    for g in s.retained_groups() {
        println!("retained {} anchored after message {}", g.group.id, g.anchor);
    }
    println!("current {}", s.current_group().unwrap().group.id);

    // The journal replays to the same state.
    let mut log = Vec::new();
    genied::session::write_journal(&mut log, &s.take_journal()).unwrap();
    let restored = SessionState::restore(SessionConfig::new("gpt-4o"), &log[..]).unwrap();
    assert_eq!(restored.messages(), s.messages());
    println!("journal: {} bytes, restores {} messages", log.len(), restored.messages().len());
}
