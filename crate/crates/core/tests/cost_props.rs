mod common;

use common::random_trace;
use genied::cost::{
    input_dominated_ratio, proactivity_multiplier, request_cost, total_cost, Money, PricingEntry, PricingTable,
    RequestPurpose, UsageScenario, CODESTRAL, GPT_4O, TOKENS_PER_QUOTE,
};
use genied::replay::{replay, ReplayOptions};
use proptest::prelude::*;

fn entry(i: u64, o: u64) -> PricingEntry {
    PricingEntry { model: "m".into(), input_price: Money::from_micros(i), output_price: Money::from_micros(o), as_of: "x".into() }
}

#[test]
fn list_prices_are_exact() {
    let t = PricingTable::default();
    let gpt = t.get(GPT_4O).unwrap();
    let cod = t.get(CODESTRAL).unwrap();
    assert_eq!((gpt.input_price.micros(), gpt.output_price.micros()), (2_500_000, 10_000_000));
    assert_eq!((cod.input_price.micros(), cod.output_price.micros()), (200_000, 6_000_000));
    assert_eq!(input_dominated_ratio(gpt, cod), 12.5);
    assert_eq!(request_cost(TOKENS_PER_QUOTE, 0, gpt).to_string(), "$2.5000");
    assert_eq!(request_cost(0, TOKENS_PER_QUOTE, cod).to_string(), "$6.0000");
}

#[test]
fn multiplier_reference_points() {
    assert_eq!(proactivity_multiplier(10.0, 1.0), 11.0);
    assert_eq!(proactivity_multiplier(10.0, 0.1), 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn request_cost_rounds_half_up(i in 0u64..1 << 40, o in 0u64..1 << 40, pi in 0u64..1 << 24, po in 0u64..1 << 24) {
        let c = request_cost(i, o, &entry(pi, po)).micros() as u128;
        let exact = i as u128 * pi as u128 + o as u128 * po as u128;
        let q = TOKENS_PER_QUOTE as u128;
        // c is the unique integer with c·q − q/2 ≤ exact < c·q + q/2
        prop_assert!(c * q <= exact + q / 2);
        prop_assert!(exact + q / 2 < (c + 1) * q);
    }

    #[test]
    fn request_cost_is_monotone(i in 0u64..1 << 32, o in 0u64..1 << 32, di in 0u64..1 << 20, d_o in 0u64..1 << 20, pi in 0u64..1 << 24, po in 0u64..1 << 24) {
        let p = entry(pi, po);
        prop_assert!(request_cost(i, o, &p) <= request_cost(i + di, o + d_o, &p));
    }

    #[test]
    fn total_cost_is_bilinear(f1 in 0u64..1 << 20, f2 in 0u64..1 << 20, c1 in 0u64..1 << 30, c2 in 0u64..1 << 30) {
        let (a, b) = (Money::from_micros(c1), Money::from_micros(c2));
        prop_assert_eq!(total_cost(f1 + f2, a), total_cost(f1, a) + total_cost(f2, a));
        prop_assert_eq!(total_cost(f1, a + b), total_cost(f1, a) + total_cost(f1, b));
        prop_assert_eq!(total_cost(f1, a).micros(), f1 * c1);
    }

    #[test]
    fn multiplier_matches_scenario_totals(f_auto in 1u64..10_000, f_pro in 0u64..10_000, ca in 1u64..100_000, cp in 0u64..1_000_000) {
        let sc = UsageScenario { f_auto, f_pro, c_auto: Money::from_micros(ca), c_pro: Money::from_micros(cp) };
        let direct = sc.total().micros() as f64 / sc.baseline().micros() as f64;
        let m = sc.multiplier().unwrap();
        prop_assert!((direct - m).abs() <= 1e-9 * m.max(1.0));
    }

    #[test]
    fn ledger_conserves_over_replayed_traces(seed in any::<u64>(), mock in 0u64..1_000) {
        let opts = ReplayOptions { seed: mock, ..ReplayOptions::default() };
        let r = replay(&random_trace(seed), &opts);
        let table = &opts.settings.pricing;
        prop_assert_eq!(r.ledger.cost_micros, r.ledger.proactive_cost_micros + r.ledger.chat_cost_micros);
        prop_assert_eq!(r.ledger.input_tokens, r.tokens.input);
        for m in &r.cost_by_model {
            let e = table.get(&m.model).unwrap();
            let exact = r.tokens.input as u128 * e.input_price.micros() as u128 + r.tokens.output as u128 * e.output_price.micros() as u128;
            let q = TOKENS_PER_QUOTE as u128;
            prop_assert_eq!(m.cost_micros.micros() as u128, (2 * exact + q) / (2 * q));
        }
    }

    #[test]
    fn ledger_totals_equal_entry_sums(rows in prop::collection::vec((any::<bool>(), 0u8..3, 0u64..1 << 32, 0u64..1 << 20, any::<bool>()), 0..64)) {
        let table = PricingTable::default();
        let mut ledger = genied::cost::CostLedger::new();
        for (i, &(chat, m, inp, out, est)) in rows.iter().enumerate() {
            let purpose = if chat { RequestPurpose::Chat } else { RequestPurpose::Proactive };
            let model = [GPT_4O, CODESTRAL, "unpriced-model"][m as usize];
            ledger.record(&table, i as u64, purpose, model, inp, out, est);
        }
        let t = ledger.totals();
        let e = ledger.entries();
        prop_assert_eq!(t.requests as usize, e.len());
        prop_assert_eq!(t.input_tokens, e.iter().map(|x| x.input_tokens).sum::<u64>());
        prop_assert_eq!(t.output_tokens, e.iter().map(|x| x.output_tokens).sum::<u64>());
        prop_assert_eq!(t.cost_micros, e.iter().filter_map(|x| x.cost).sum::<Money>());
        prop_assert_eq!(t.chat_cost_micros, e.iter().filter(|x| x.purpose == RequestPurpose::Chat).filter_map(|x| x.cost).sum::<Money>());
        prop_assert_eq!(t.cost_micros, t.proactive_cost_micros + t.chat_cost_micros);
        prop_assert_eq!(t.unpriced_requests as usize, e.iter().filter(|x| x.cost.is_none()).count());
        prop_assert_eq!(t.estimated_requests as usize, e.iter().filter(|x| x.estimated).count());
    }
}
