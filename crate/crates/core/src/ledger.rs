//! Append-only payment ledger.
//!
//! Translations are paid per unit once they pass automatic checks; verdicts are
//! paid per completed set of ten, with the remainder carried forward.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;
use crate::types::{Timestamp, WorkerId};

pub const VERDICTS_PER_SET: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceSheet {
    pub per_translation: Money,
    /// Price of one completed set of ten verdicts.
    pub per_verdict_set: Money,
}

impl Default for PriceSheet {
    fn default() -> Self {
        PriceSheet {
            per_translation: Money::from_cents(2),
            per_verdict_set: Money::from_cents(1),
        }
    }
}

impl PriceSheet {
    pub fn validate(&self) -> Result<()> {
        if self.per_translation.is_negative() || self.per_verdict_set.is_negative() {
            return Err(Error::Config("prices must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Translation,
    VerificationSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEntry {
    pub worker_id: WorkerId,
    pub kind: CostKind,
    pub units: u64,
    pub amount: Money,
    pub at: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostFilter {
    pub worker: Option<WorkerId>,
    pub kind: Option<CostKind>,
    /// Inclusive lower bound.
    pub from: Option<Timestamp>,
    /// Exclusive upper bound.
    pub until: Option<Timestamp>,
}

impl CostFilter {
    pub fn matches(&self, e: &CostEntry) -> bool {
        self.worker.is_none_or(|w| w == e.worker_id)
            && self.kind.is_none_or(|k| k == e.kind)
            && self.from.is_none_or(|t| e.at >= t)
            && self.until.is_none_or(|t| e.at < t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub translation: Money,
    pub verification_set: Money,
    pub grand_total: Money,
    pub entries: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    prices: PriceSheet,
    entries: Vec<CostEntry>,
    verdicts: BTreeMap<WorkerId, u64>,
    settled_sets: BTreeMap<WorkerId, u64>,
}

impl Ledger {
    pub fn new(prices: PriceSheet) -> Self {
        Ledger { prices, ..Default::default() }
    }

    pub fn prices(&self) -> &PriceSheet {
        &self.prices
    }

    /// New prices apply to entries booked from now on.
    pub fn set_prices(&mut self, prices: PriceSheet) {
        self.prices = prices;
    }

    pub fn entries(&self) -> &[CostEntry] {
        &self.entries
    }

    pub fn record_translation_payment(&mut self, worker_id: WorkerId, at: Timestamp) -> CostEntry {
        let entry = CostEntry {
            worker_id,
            kind: CostKind::Translation,
            units: 1,
            amount: self.prices.per_translation,
            at,
        };
        self.entries.push(entry.clone());
        entry
    }

    pub fn record_verdict(&mut self, worker_id: WorkerId) {
        *self.verdicts.entry(worker_id).or_default() += 1;
    }

    pub fn verdict_count(&self, worker_id: WorkerId) -> u64 {
        self.verdicts.get(&worker_id).copied().unwrap_or(0)
    }

    /// Books one entry per newly completed set of ten verdicts.
    pub fn settle_verification_payments(&mut self, worker_id: WorkerId, at: Timestamp) -> Vec<CostEntry> {
        let complete = self.verdict_count(worker_id) / VERDICTS_PER_SET;
        let settled = self.settled_sets.entry(worker_id).or_default();
        let fresh = complete.saturating_sub(*settled);
        *settled = complete;
        let new: Vec<CostEntry> = (0..fresh)
            .map(|_| CostEntry {
                worker_id,
                kind: CostKind::VerificationSet,
                units: 1,
                amount: self.prices.per_verdict_set,
                at,
            })
            .collect();
        self.entries.extend(new.iter().cloned());
        new
    }

    pub fn settled_sets(&self) -> u64 {
        self.settled_sets.values().sum()
    }

    pub fn totals(&self, filter: &CostFilter) -> Totals {
        let mut t = Totals::default();
        for e in self.entries.iter().filter(|e| filter.matches(e)) {
            match e.kind {
                CostKind::Translation => t.translation += e.amount,
                CostKind::VerificationSet => t.verification_set += e.amount,
            }
            t.entries += 1;
        }
        t.grand_total = t.translation + t.verification_set;
        t
    }

    /// Per-worker totals, ordered by worker id.
    pub fn totals_by_worker(&self) -> BTreeMap<WorkerId, Totals> {
        let workers: std::collections::BTreeSet<WorkerId> = self.entries.iter().map(|e| e.worker_id).collect();
        workers
            .into_iter()
            .map(|w| (w, self.totals(&CostFilter { worker: Some(w), ..Default::default() })))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["worker_id", "kind", "units", "amount", "at"])
            .map_err(|e| Error::Integrity(e.to_string()))?;
        for e in &self.entries {
            let kind = match e.kind {
                CostKind::Translation => "translation",
                CostKind::VerificationSet => "verification_set",
            };
            w.write_record([
                e.worker_id.to_string(),
                kind.to_string(),
                e.units.to_string(),
                e.amount.to_string(),
                e.at.to_string(),
            ])
            .map_err(|e| Error::Integrity(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Integrity(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Integrity(e.to_string()))
    }
}

/// Cost of translating `sentences_per_language` sentences into each of
/// `num_languages` languages at `price_per_sentence`.
pub fn project_cost(num_languages: u64, sentences_per_language: u64, price_per_sentence: Money) -> Result<Money> {
    if price_per_sentence.is_negative() {
        return Err(Error::input("price must be non-negative"));
    }
    let sentences = num_languages
        .checked_mul(sentences_per_language)
        .ok_or_else(|| Error::Range("sentence count overflows".into()))?;
    price_per_sentence.checked_mul(sentences)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_and_many_translations() {
        let mut l = Ledger::new(PriceSheet::default());
        let e = l.record_translation_payment(WorkerId(1), Timestamp(5));
        assert_eq!(e.amount.to_string(), "0.02");
        for _ in 0..99 {
            l.record_translation_payment(WorkerId(1), Timestamp(6));
        }
        assert_eq!(l.totals(&CostFilter::default()).translation, Money::from_units(2));
    }

    #[test]
    fn empty_ledger_totals() {
        let t = Ledger::default().totals(&CostFilter::default());
        assert_eq!(t, Totals::default());
    }

    #[test]
    fn verdict_sets_floor_and_carry() {
        let mut l = Ledger::new(PriceSheet::default());
        for _ in 0..30 {
            l.record_verdict(WorkerId(1));
        }
        let booked = l.settle_verification_payments(WorkerId(1), Timestamp(0));
        assert_eq!(booked.len(), 3);
        assert_eq!(booked.iter().map(|e| e.amount).sum::<Money>(), Money::from_cents(3));

        for _ in 0..35 {
            l.record_verdict(WorkerId(2));
        }
        assert_eq!(l.settle_verification_payments(WorkerId(2), Timestamp(0)).len(), 3);
        for _ in 0..5 {
            l.record_verdict(WorkerId(2));
        }
        assert_eq!(l.settle_verification_payments(WorkerId(2), Timestamp(0)).len(), 1);

        for _ in 0..9 {
            l.record_verdict(WorkerId(3));
        }
        assert!(l.settle_verification_payments(WorkerId(3), Timestamp(0)).is_empty());
        assert_eq!(l.settled_sets(), 7);
    }

    #[test]
    fn settle_is_idempotent() {
        let mut l = Ledger::new(PriceSheet::default());
        for _ in 0..10 {
            l.record_verdict(WorkerId(1));
        }
        assert_eq!(l.settle_verification_payments(WorkerId(1), Timestamp(0)).len(), 1);
        assert!(l.settle_verification_payments(WorkerId(1), Timestamp(0)).is_empty());
    }

    #[test]
    fn filters() {
        let mut l = Ledger::new(PriceSheet::default());
        l.record_translation_payment(WorkerId(1), Timestamp(10));
        l.record_translation_payment(WorkerId(2), Timestamp(20));
        l.record_translation_payment(WorkerId(2), Timestamp(30));
        let w2 = l.totals(&CostFilter { worker: Some(WorkerId(2)), ..Default::default() });
        assert_eq!(w2.grand_total, Money::from_cents(4));
        let window = l.totals(&CostFilter { from: Some(Timestamp(10)), until: Some(Timestamp(30)), ..Default::default() });
        assert_eq!(window.entries, 2);
        let none = l.totals(&CostFilter { kind: Some(CostKind::VerificationSet), ..Default::default() });
        assert_eq!(none.grand_total, Money::ZERO);
    }

    #[test]
    fn projections() {
        assert_eq!(project_cost(7000, 1_000_000, Money::from_units(1)).unwrap(), Money::from_units(7_000_000_000));
        assert_eq!(project_cost(0, 123, Money::from_units(5)).unwrap(), Money::ZERO);
        assert_eq!(project_cost(7000, 1_000_000, Money::from_cents(2)).unwrap(), Money::from_units(140_000_000));
        assert!(matches!(project_cost(u64::MAX, 2, Money::from_units(1)), Err(Error::Range(_))));
        assert!(matches!(project_cost(1_000_000, 1_000_000_000, Money::from_units(2)), Err(Error::Range(_))));
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let mut l = Ledger::new(PriceSheet::default());
        l.record_translation_payment(WorkerId(7), Timestamp(1));
        let csv = l.to_csv().unwrap();
        assert_eq!(csv, "worker_id,kind,units,amount,at\n7,translation,1,0.02,1\n");
    }
}
