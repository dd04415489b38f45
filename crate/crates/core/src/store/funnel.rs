//! Funnel statistics and corpus export.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use sha2::{Digest, Sha256};

use super::state::State;
use crate::error::{Error, Result};
use crate::qc::Verdict;
use crate::tasks::Translation;
use crate::types::{Direction, Lang, Timestamp, WorkerId};

/// Incrementally maintained per-direction counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionCounters {
    pub submitted: u64,
    pub auto_rejected: u64,
    /// Passed the automatic checks.
    pub translated: u64,
    /// Received all three verdicts.
    pub fully_verified: u64,
    pub in_corpus: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub translated: u64,
    pub fully_verified: u64,
    pub in_corpus: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelStats {
    pub directions: BTreeMap<Direction, FunnelCounts>,
    pub total: FunnelCounts,
}

impl FunnelStats {
    /// Plain-text table with one row per stage and one column per direction,
    /// total first, then the collected directions in reporting order, then
    /// any others.
    pub fn render_table(&self) -> String {
        let mut order: Vec<Direction> = Direction::collected()
            .into_iter()
            .filter(|d| self.directions.contains_key(d))
            .collect();
        for d in self.directions.keys() {
            if !order.contains(d) {
                order.push(d.clone());
            }
        }
        let mut columns: Vec<(String, FunnelCounts)> = vec![("Total".to_string(), self.total)];
        columns.extend(order.iter().map(|d| (d.to_string(), self.directions[d])));
        let width = columns.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
        let mut out = format!("{:<12}", "");
        for (name, _) in &columns {
            let _ = write!(out, " {name:>width$}");
        }
        out.push('\n');
        let stages: [(&str, fn(&FunnelCounts) -> u64); 3] = [
            ("Translated", |c| c.translated),
            ("Verified", |c| c.fully_verified),
            ("In corpus", |c| c.in_corpus),
        ];
        for (label, get) in stages {
            let _ = write!(out, "{label:<12}");
            for (_, c) in &columns {
                let _ = write!(out, " {:>width$}", get(c));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Jsonl,
    Tsv,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(ExportFormat::Jsonl),
            "tsv" => Ok(ExportFormat::Tsv),
            other => Err(Error::input(format!("unknown export format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub src: String,
    pub tgt: String,
    pub src_lang: Lang,
    pub tgt_lang: Lang,
    /// Empty for pending records.
    pub verdicts: Vec<Verdict>,
    /// Stable pseudonym of the translator.
    pub translator: String,
    pub submitted_at: Timestamp,
    pub accepted_at: Option<Timestamp>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub pending: bool,
}

/// Pseudonym derived from the worker id; stable across exports.
pub fn pseudonym(worker: WorkerId) -> String {
    let digest = Sha256::digest(format!("corpusforge-worker:{worker}").as_bytes());
    format!("t-{}", hex::encode(&digest[..6]))
}

/// Accepted pairs of one direction ordered by acceptance time, then id. With
/// `include_pending`, translations that passed the automatic checks but are
/// not yet finalized follow in id order.
pub fn corpus_records(state: &State, direction: &Direction, include_pending: bool) -> Result<Vec<CorpusRecord>> {
    if !state.known_directions().contains(direction) {
        return Err(Error::input(format!("unknown direction {direction}")));
    }
    let record = |tr: &Translation, pending: bool| {
        let src = state
            .task(tr.task_id)
            .and_then(|t| state.source(t.source_id))
            .map(|s| s.text.clone())
            .unwrap_or_default();
        let verdicts = tr
            .assignment_ids
            .iter()
            .filter_map(|a| state.assignment(*a))
            .filter_map(|a| a.verdict)
            .collect();
        CorpusRecord {
            src,
            tgt: tr.text.clone(),
            src_lang: tr.direction.src.clone(),
            tgt_lang: tr.direction.tgt.clone(),
            verdicts,
            translator: pseudonym(tr.worker_id),
            submitted_at: tr.submitted_at,
            accepted_at: tr.finalized_at,
            pending,
        }
    };
    let mut out: Vec<CorpusRecord> = state.accepted(direction).map(|tr| record(tr, false)).collect();
    if include_pending {
        out.extend(
            state
                .translations()
                .filter(|tr| &tr.direction == direction)
                .filter(|tr| tr.decision.is_none() && tr.auto_check.as_ref().is_some_and(|r| r.passed))
                .map(|tr| record(tr, true)),
        );
    }
    Ok(out)
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// JSONL: one object per line. TSV: `src<TAB>tgt` per line, no header.
pub fn render_corpus(records: &[CorpusRecord], format: ExportFormat) -> Result<String> {
    let mut out = String::new();
    for r in records {
        match format {
            ExportFormat::Jsonl => {
                out.push_str(&serde_json::to_string(r).map_err(|e| Error::Integrity(e.to_string()))?);
                out.push('\n');
            }
            ExportFormat::Tsv => {
                let _ = writeln!(out, "{}\t{}", tsv_field(&r.src), tsv_field(&r.tgt));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_stage_rows_and_direction_columns() {
        let mut stats = FunnelStats::default();
        stats.directions.insert("che-rus".parse().unwrap(), FunnelCounts { translated: 491, fully_verified: 491, in_corpus: 380 });
        stats.directions.insert("fuv-eng".parse().unwrap(), FunnelCounts { translated: 220, fully_verified: 88, in_corpus: 53 });
        stats.total = FunnelCounts { translated: 711, fully_verified: 579, in_corpus: 433 };
        let table = stats.render_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        let header: Vec<&str> = lines[0].split_whitespace().collect();
        assert_eq!(header, ["Total", "fuv-eng", "che-rus"]);
        assert_eq!(lines[2].split_whitespace().collect::<Vec<_>>(), ["Verified", "579", "88", "491"]);
        assert!(lines[3].starts_with("In corpus"));
    }
}
