//! Parses model output into a suggestion group, showing fence stripping,
//! dropped items and the typed errors.
//!
//! `cargo run --example parse_suggestions`

use genied::parser::{parse_response, serialize_group};
use genied::prompt::{AliasTable, EnabledTypes, SuggestionType};

fn main() {
    let aliases = AliasTable::default();
    let enabled = EnabledTypes::new([SuggestionType::BugFix, SuggestionType::Test, SuggestionType::Improvement]).unwrap();
    let raw = r#"```json
[
  {"tag": "bug-fix", "description": "Integer division for the middle index", "code": "mid = len(s) // 2", "explanation": "`/` yields a float index."},
  {"tag": "Testing", "description": "Cover even-length input", "code": "assert median([1, 2, 3, 4]) == 2.5", "explanation": ""},
  {"tag": "syntax-hint", "description": "Disabled type, dropped", "code": "", "explanation": ""},
  {"tag": "improvement", "description": "Reject empty input early", "code": "if not xs: raise ValueError", "explanation": ""}
]
```"#;
    let parsed = parse_response(raw, &enabled, &aliases, "g1", 5_000).unwrap();
    for s in &parsed.group.suggestions {
        println!("{} [{}] {}", s.id, s.tag, s.description);
    }
    println!("warnings: {:?}", parsed.warnings);
    println!("canonical form:\n{}", serialize_group(&parsed.group));

    for bad in ["I think you should add tests.", "[]", r#"[{"tag": "bug-fix"}]"#] {
        println!("{bad:?} -> {:?}", parse_response(bad, &enabled, &aliases, "g2", 0).unwrap_err());
    }
}
