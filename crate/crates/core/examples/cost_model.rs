//! Per-request pricing and the proactivity multiplier against an
//! autocomplete-only baseline.
//!
//! `cargo run --example cost_model`

use genied::cost::{input_dominated_ratio, proactivity_multiplier, PricingTable, UsageScenario, CODESTRAL, GPT_4O};

fn main() {
    let table = PricingTable::default();
    let gpt = table.get(GPT_4O).unwrap();
    let codestral = table.get(CODESTRAL).unwrap();
    for e in [gpt, codestral] {
        println!(
            "{:<10} 1M in {}  1M out {}  (as of {})",
            e.model,
            genied::cost::request_cost(1_000_000, 0, e),
            genied::cost::request_cost(0, 1_000_000, e),
            e.as_of
        );
    }
    println!("10k in + 100 out on {GPT_4O}: {}", table.request_cost(GPT_4O, 10_000, 100).unwrap());

    println!("r=10, p=1   -> {}x", proactivity_multiplier(10.0, 1.0));
    println!("r=10, p=0.1 -> {}x", proactivity_multiplier(10.0, 0.1));
    let r = input_dominated_ratio(gpt, codestral);
    println!("input-price ratio {r} -> {}x at p=1", proactivity_multiplier(r, 1.0));

    // 2,000 autocomplete requests a month, proactive at a tenth of that, 4k-token context.
    let sc = UsageScenario::equal_context(4_000, 32, 300, codestral, gpt, 2_000, 200);
    println!(
        "scenario: baseline {}  total {}  r {:.2}  p {:.2}  multiplier {:.2}",
        sc.baseline(),
        sc.total(),
        sc.cost_ratio().unwrap(),
        sc.frequency_ratio().unwrap(),
        sc.multiplier().unwrap()
    );
}
