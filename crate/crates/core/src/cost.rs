//! Request pricing, the `total = f · c` cost model, and the proactivity multiplier.
//!
//! Money is fixed-point micro-dollars so ledger sums are exact.

use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Micro-dollars per dollar.
pub const MICROS: u64 = 1_000_000;
/// Prices are quoted per this many tokens.
pub const TOKENS_PER_QUOTE: u64 = 1_000_000;

pub const GPT_4O: &str = "gpt-4o";
pub const CODESTRAL: &str = "codestral";
/// Monthly price of an autocomplete subscription used as the comparison baseline.
pub const AUTOCOMPLETE_SUBSCRIPTION_USD: u64 = 10;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("model {0:?} is not in the pricing table")]
    UnknownModel(String),
    #[error("invalid price for {model}: {price}")]
    InvalidPrice { model: String, price: f64 },
    #[error("cannot read pricing table {path}: {reason}")]
    Table { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(u64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: u64) -> Self {
        Money(micros)
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    /// Rounds to the nearest micro-dollar. Negative or non-finite input is rejected.
    pub fn from_dollars(d: f64) -> Option<Self> {
        if !d.is_finite() || d < 0.0 {
            return None;
        }
        Some(Money((d * MICROS as f64).round() as u64))
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / MICROS as f64
    }

    pub fn checked_mul(self, n: u64) -> Option<Money> {
        self.0.checked_mul(n).map(Money)
    }
}

impl Add for Money {
    type Output = Money;

    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    /// Dollars rounded half-up to four decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ten_thousandths = (self.0 + 50) / 100;
        write!(f, "${}.{:04}", ten_thousandths / 10_000, ten_thousandths % 10_000)
    }
}

/// Per-model token prices, quoted per million tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingEntry {
    pub model: String,
    pub input_price: Money,
    pub output_price: Money,
    pub as_of: String,
}

impl PricingEntry {
    pub fn new(model: &str, input_dollars: f64, output_dollars: f64, as_of: &str) -> Result<Self, CostError> {
        let price = |p: f64| {
            Money::from_dollars(p).ok_or_else(|| CostError::InvalidPrice {
                model: model.to_owned(),
                price: p,
            })
        };
        Ok(Self {
            model: model.to_owned(),
            input_price: price(input_dollars)?,
            output_price: price(output_dollars)?,
            as_of: as_of.to_owned(),
        })
    }
}

/// `input/1e6 · input_price + output/1e6 · output_price`, rounded half-up to the micro-dollar.
pub fn request_cost(input_tokens: u64, output_tokens: u64, p: &PricingEntry) -> Money {
    let scaled = input_tokens as u128 * p.input_price.0 as u128 + output_tokens as u128 * p.output_price.0 as u128;
    let q = TOKENS_PER_QUOTE as u128;
    Money(((scaled + q / 2) / q) as u64)
}

/// Total spend for `f` requests at `c` each.
pub fn total_cost(f: u64, c: Money) -> Money {
    c.checked_mul(f).expect("cost overflow: more than u64::MAX micro-dollars")
}

/// Spend relative to an autocomplete-only baseline: `1 + p·r`, where `r` is the per-request
/// cost ratio (proactive / autocomplete) and `p` the proactive-to-autocomplete frequency ratio.
pub fn proactivity_multiplier(r: f64, p: f64) -> f64 {
    1.0 + p * r
}

/// Per-request cost ratio when input tokens dominate (output → 0).
pub fn input_dominated_ratio(proactive: &PricingEntry, autocomplete: &PricingEntry) -> f64 {
    proactive.input_price.0 as f64 / autocomplete.input_price.0 as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageScenario {
    pub f_auto: u64,
    pub f_pro: u64,
    pub c_auto: Money,
    pub c_pro: Money,
}

impl UsageScenario {
    /// Both request kinds see the same context length; only the price and output length differ.
    pub fn equal_context(
        context_tokens: u64,
        auto_output_tokens: u64,
        pro_output_tokens: u64,
        autocomplete: &PricingEntry,
        proactive: &PricingEntry,
        f_auto: u64,
        f_pro: u64,
    ) -> Self {
        Self {
            f_auto,
            f_pro,
            c_auto: request_cost(context_tokens, auto_output_tokens, autocomplete),
            c_pro: request_cost(context_tokens, pro_output_tokens, proactive),
        }
    }

    pub fn baseline(&self) -> Money {
        total_cost(self.f_auto, self.c_auto)
    }

    pub fn total(&self) -> Money {
        self.baseline() + total_cost(self.f_pro, self.c_pro)
    }

    pub fn cost_ratio(&self) -> Option<f64> {
        (self.c_auto.0 > 0).then(|| self.c_pro.0 as f64 / self.c_auto.0 as f64)
    }

    pub fn frequency_ratio(&self) -> Option<f64> {
        (self.f_auto > 0).then(|| self.f_pro as f64 / self.f_auto as f64)
    }

    pub fn multiplier(&self) -> Option<f64> {
        Some(proactivity_multiplier(self.cost_ratio()?, self.frequency_ratio()?))
    }
}

#[derive(Debug, Deserialize)]
struct PricingFileEntry {
    model: String,
    input_price: f64,
    output_price: f64,
    #[serde(default)]
    as_of: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PricingTable {
    entries: BTreeMap<String, PricingEntry>,
}

impl Default for PricingTable {
    /// January 2025 list prices.
    fn default() -> Self {
        let mut t = Self {
            entries: BTreeMap::new(),
        };
        t.insert(PricingEntry::new(GPT_4O, 2.5, 10.0, "2025-01").expect("valid"));
        t.insert(PricingEntry::new(CODESTRAL, 0.2, 6.0, "2025-01").expect("valid"));
        t
    }
}

impl PricingTable {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, e: PricingEntry) {
        self.entries.insert(e.model.clone(), e);
    }

    pub fn get(&self, model: &str) -> Result<&PricingEntry, CostError> {
        self.entries
            .get(model)
            .or_else(|| self.entries.get(&model.to_lowercase()))
            .ok_or_else(|| CostError::UnknownModel(model.to_owned()))
    }

    pub fn entries(&self) -> impl Iterator<Item = &PricingEntry> {
        self.entries.values()
    }

    pub fn request_cost(&self, model: &str, input_tokens: u64, output_tokens: u64) -> Result<Money, CostError> {
        Ok(request_cost(input_tokens, output_tokens, self.get(model)?))
    }

    /// Parses a JSON array of `{model, input_price, output_price, as_of}` (prices in dollars per
    /// million tokens) and overlays it on the defaults.
    pub fn with_overrides_json(mut self, json: &str) -> Result<Self, CostError> {
        let rows: Vec<PricingFileEntry> = serde_json::from_str(json).map_err(|e| CostError::Table {
            path: "<inline>".into(),
            reason: e.to_string(),
        })?;
        for r in rows {
            self.insert(PricingEntry::new(&r.model, r.input_price, r.output_price, &r.as_of)?);
        }
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self, CostError> {
        let text = std::fs::read_to_string(path).map_err(|e| CostError::Table {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::default().with_overrides_json(&text).map_err(|e| match e {
            CostError::Table { reason, .. } => CostError::Table {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestPurpose {
    Proactive,
    Chat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub request_id: u64,
    pub purpose: RequestPurpose,
    pub model: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub estimated: bool,
    /// `None` when the model had no pricing entry.
    pub cost: Option<Money>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerTotals {
    pub requests: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_micros: Money,
    pub proactive_cost_micros: Money,
    pub chat_cost_micros: Money,
    pub estimated_requests: u64,
    pub unpriced_requests: u64,
}

/// Append-only per-request cost record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    entries: Vec<LedgerEntry>,
    totals: LedgerTotals,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        table: &PricingTable,
        request_id: u64,
        purpose: RequestPurpose,
        model: &str,
        input_tokens: u64,
        output_tokens: u64,
        estimated: bool,
    ) -> &LedgerEntry {
        let cost = table.request_cost(model, input_tokens, output_tokens).ok();
        let t = &mut self.totals;
        t.requests += 1;
        t.input_tokens += input_tokens;
        t.output_tokens += output_tokens;
        t.estimated_requests += estimated as u64;
        match cost {
            Some(c) => {
                t.cost_micros = t.cost_micros + c;
                match purpose {
                    RequestPurpose::Proactive => t.proactive_cost_micros = t.proactive_cost_micros + c,
                    RequestPurpose::Chat => t.chat_cost_micros = t.chat_cost_micros + c,
                }
            }
            None => t.unpriced_requests += 1,
        }
        self.entries.push(LedgerEntry {
            request_id,
            purpose,
            model: model.to_owned(),
            input_tokens,
            output_tokens,
            estimated,
            cost,
        });
        self.entries.last().expect("just pushed")
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn totals(&self) -> LedgerTotals {
        self.totals
    }
}
