//! Mirrors a document through incremental edits and extracts the code context
//! around the cursor.
//!
//! `cargo run --example context_window`

use genied::workspace::{OffsetRange, TextChange, Workspace};

fn main() {
    let uri = "file:///demo/greet.py";
    let mut ws = Workspace::new();
    ws.open(uri, "def greet(name):\n    print(name)\n");

    // Edits apply as one batch; the cursor follows the end of the last edit.
    let version = ws
        .apply_changes(
            uri,
            &[
                TextChange {
                    range: Some(OffsetRange { start: 27, end: 31 }),
                    text: "f\"Hello, {name}!\"".into(),
                },
                TextChange {
                    range: Some(OffsetRange { start: 0, end: 0 }),
                    text: "# greeting helper\n".into(),
                },
            ],
        )
        .expect("edits are in range");
    println!("version {version}");
    println!("{}", ws.document(uri).unwrap().text());

    for window in [8, 500] {
        let ctx = ws.active_context(window).expect("a document is open").expect("cursor is valid");
        println!("window {window}: before={:?} after={:?}", ctx.before, ctx.after);
    }

    ws.move_cursor(uri, 0).unwrap();
    let ctx = ws.active_context(12).unwrap().unwrap();
    println!("at offset 0: before={:?} after={:?}", ctx.before, ctx.after);
}
