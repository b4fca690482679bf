//! Builds a proactive prompt from code context, chat history, a task
//! description and a reduced set of suggestion types.
//!
//! `cargo run --example prompt_assembly`

use genied::prompt::{build_prompt, AliasTable, EnabledTypes, PromptConfig, TaskDescription, TaskSource};
use genied::session::{ChatMessage, Origin, Role};
use genied::workspace::Document;

fn main() {
    let doc = Document::new("file:///hw/median.py", "def median(xs):\n    s = sorted(xs)\n    return s[len(s) / 2]\n");
    let ctx = doc.extract_context(doc.len() - 1, 500).unwrap();
    let history = vec![ChatMessage {
        role: Role::User,
        body: "why does median crash on my list?".into(),
        origin: Origin::Typed,
        at: 1_000,
    }];
    let task = TaskDescription::new("Homework: finish median() without being handed the answer.", TaskSource::User).unwrap();
    let enabled = EnabledTypes::from_labels(&AliasTable::default(), &["Debugging", "Efficiency"]).unwrap();

    let bundle = build_prompt(&ctx, &history, &task, &enabled, &PromptConfig::default(), "gpt-4o").unwrap();
    let ids: Vec<&str> = bundle.section_ids().iter().map(|s| s.as_str()).collect();
    println!("sections: {}", ids.join(", "));
    println!("characters: {}", bundle.char_count());
    println!("----\n{}", bundle.user_text());
}
