//! The seeded mock backend: identical prompts and seeds give identical output,
//! and scripted replies inject faults.
//!
//! `cargo run --example mock_provider`

use genied::prompt::{build_prompt, EnabledTypes, PromptConfig, TaskDescription};
use genied::provider::{MockProvider, MockReply, ProviderError, RequestPayload};
use genied::workspace::Document;

fn main() {
    let doc = Document::new("file:///demo/calc.py", "class Calculator:\n    def add(self, a, b):\n        return a + b\n");
    let ctx = doc.extract_context(doc.len(), 500).unwrap();
    let bundle = build_prompt(
        &ctx,
        &[],
        &TaskDescription::default(),
        &EnabledTypes::all(),
        &PromptConfig::default(),
        "gpt-4o",
    )
    .unwrap();
    let payload = RequestPayload::Proactive(bundle);

    let a = MockProvider::new(42).respond(&payload).unwrap();
    let b = MockProvider::new(42).respond(&payload).unwrap();
    assert_eq!(a, b);
    println!("usage: {:?}", a.usage);
    println!("{}", a.raw);

    let faulty = MockProvider::new(42).with_script([
        MockReply::Fail(ProviderError::HttpError(503)),
        MockReply::Text("not json".into()),
    ]);
    println!("scripted 1: {:?}", faulty.respond(&payload).map(|r| r.raw));
    println!("scripted 2: {:?}", faulty.respond(&payload).map(|r| r.raw));
    println!("then seeded: {} chars", faulty.respond(&payload).unwrap().raw.len());
}
