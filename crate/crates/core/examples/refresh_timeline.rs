//! Drives the refresh scheduler by hand: a typing burst, a chat interruption,
//! and a manual refresh.
//!
//! `cargo run --example refresh_timeline`

use genied::scheduler::{Action, EventKind, SchedulerConfig, SchedulerEvent, SchedulerState};

fn main() {
    let cfg = SchedulerConfig::default();
    let mut s = SchedulerState::new();
    let feed = |s: &mut SchedulerState, kind: EventKind, at: u64| {
        let action = s.on_event(&cfg, SchedulerEvent::new(kind, at)).unwrap();
        println!("{at:>6} ms  {kind:?} -> {action:?} (wakeup {:?})", s.next_wakeup());
        action
    };

    for t in (0..=4_000).step_by(1_000) {
        feed(&mut s, EventKind::CodeChange, t);
    }
    // A chat message drops the pending debounce and suppresses for longer than it.
    feed(&mut s, EventKind::ChatMessageSent, 6_000);
    // An edit inside the suppression window re-arms, but cannot fire before 36,000.
    feed(&mut s, EventKind::CodeChange, 20_000);
    let mut t = 20_000;
    loop {
        let wake = s.next_wakeup().expect("a change is pending");
        t = t.max(wake);
        if s.tick(t) == Action::FireRequest {
            println!("{t:>6} ms  tick -> FireRequest");
            break;
        }
    }
    feed(&mut s, EventKind::RequestCompleted, t + 900);

    // Manual refresh ignores suppression but never overlaps an in-flight request.
    feed(&mut s, EventKind::ChatTyping, 40_000);
    feed(&mut s, EventKind::ManualTrigger, 40_100);
    feed(&mut s, EventKind::ManualTrigger, 40_200);
    feed(&mut s, EventKind::RequestCompleted, 41_000);
}
